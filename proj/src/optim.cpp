#include "spca/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spca {

void OptimizerConfig::validate() const
{
    require(lr > 0.0 && std::isfinite(lr), "optimizer: lr must be > 0");
    if (kind == OptimizerKind::sgd) {
        require(momentum >= 0.0 && momentum < 1.0, "optimizer: momentum must lie in [0, 1)");
    } else {
        require(beta1 >= 0.0 && beta1 < 1.0, "optimizer: beta1 must lie in [0, 1)");
        require(beta2 >= 0.0 && beta2 < 1.0, "optimizer: beta2 must lie in [0, 1)");
        require(eps > 0.0, "optimizer: eps must be > 0");
    }
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config)
{
    config_.validate();
}

void Optimizer::update(std::size_t slot, double* param, const double* grad, Index size)
{
    if (m_.size() <= slot) {
        m_.resize(slot + 1);
        v_.resize(slot + 1);
    }
    if (m_[slot].size() != size) {
        m_[slot] = Vec::Zero(size);
        v_[slot] = Vec::Zero(size);
    }
    Eigen::Map<Vec> p(param, size);
    Eigen::Map<const Vec> g(grad, size);
    if (config_.kind == OptimizerKind::sgd) {
        m_[slot] = config_.momentum * m_[slot] + g;
        p -= config_.lr * m_[slot];
        return;
    }
    const long t = std::max<long>(t_, 1);
    m_[slot] = config_.beta1 * m_[slot] + (1.0 - config_.beta1) * g;
    v_[slot] = config_.beta2 * v_[slot] + (1.0 - config_.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(config_.beta1, double(t));
    const double c2 = 1.0 - std::pow(config_.beta2, double(t));
    p.array() -= config_.lr * (m_[slot].array() / c1) / ((v_[slot].array() / c2).sqrt() + config_.eps);
}

void TrainConfig::validate() const
{
    optimizer.validate();
    constraints.validate();
    require(batch_size >= 1, "train: batch_size must be >= 1");
    require(epochs >= 0, "train: epochs must be >= 0");
}

namespace {

using Unit = ConstraintSpec::UnitNorm;
using Orth = ConstraintSpec::Orthogonality;

void redraw_degenerate(Mat& W, Rng& rng, int& count)
{
    for (Index j = 0; j < W.cols(); ++j) {
        if (W.col(j).norm() > kDegenerateNorm && W.col(j).allFinite())
            continue;
        W.col(j) = randn(W.rows(), 1, rng);
        W.col(j) /= W.col(j).norm();
        ++count;
    }
}

void apply_projections(Mat& W, const ConstraintSpec& c, Rng& rng, int& reinit)
{
    redraw_degenerate(W, rng, reinit);
    if (c.orthogonality == Orth::iterative) {
        IterativeOrth it;
        it.beta = c.beta;
        it.max_iter = c.max_iter;
        it.tol = c.tol;
        W = orthogonalize(W, it).W;
    } else if (c.orthogonality == Orth::gram_schmidt) {
        try {
            W = orthogonalize(W, GramSchmidtOrth{}).W;
        } catch (const RankDeficientError&) {
            // Redraw the offending columns and retry once.
            W.rightCols(1) = randn(W.rows(), 1, rng);
            ++reinit;
            W = orthogonalize(W, GramSchmidtOrth{}).W;
        }
    }
    if (c.unit_norm == Unit::project || c.unit_norm == Unit::weight_norm) {
        redraw_degenerate(W, rng, reinit);
        W = project_unit_columns(W);
    }
}

Mat regulariser_grad(const Mat& W, const ConstraintSpec& c, const Vec& sigma_hat)
{
    Mat g = Mat::Zero(W.rows(), W.cols());
    if (c.orthogonality == Orth::symmetric_reg)
        g += symmetric_orth_grad(W, c.alpha);
    else if (c.orthogonality == Orth::asymmetric_reg) {
        if (c.sigma_weighted && sigma_hat.size() == W.cols())
            g += asymmetric_sigma_orth_grad(W, c.beta, sigma_hat);
        else
            g += asymmetric_orth_grad(W, c.beta);
    }
    if (c.unit_norm == Unit::regularize)
        g += unit_norm_reg_grad(W, c.unit_norm_strength);
    return g;
}

}  // namespace

TrainResult train(const Method& method, const DataMatrix<double>& data, Params init, const TrainConfig& config)
{
    config.validate();
    require(bool(method.grad), "train: method has no gradient op");
    require(init.W.rows() == data.p(), "train: W rows do not match data dimension");
    const Mat& X = data.values();
    const Index n = X.rows();
    require(n >= 1, "train: empty data");

    Rng rng(config.seed);
    Optimizer opt(config.optimizer);
    TrainResult result;
    Params params = std::move(init);
    if (config.constraints.unit_norm == Unit::project || config.constraints.unit_norm == Unit::weight_norm)
        apply_projections(params.W, config.constraints, rng, result.reinitialised_columns);

    auto evaluate = [&](const Params& p) {
        return method.evaluate ? method.evaluate(p, X) : 0.0;
    };
    result.params = params;
    result.final_params = params;
    result.best_loss = std::numeric_limits<double>::infinity();
    if (config.epochs == 0) {
        result.best_loss = evaluate(params);
        return result;
    }

    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index(0));
    const Index bs = std::min<Index>(config.batch_size, n);
    long step = 0;
    Mat batch(bs, X.cols());

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(perm.begin(), perm.end(), rng);
        double objective = 0.0;
        Index batches = 0;
        for (Index start = 0; start < n; start += bs) {
            const Index len = std::min(bs, n - start);
            batch.resize(len, X.cols());
            for (Index i = 0; i < len; ++i)
                batch.row(i) = X.row(perm[std::size_t(start + i)]);

            // Weight normalisation: the method sees W = V/||V||.
            WeightNorm wn;
            Params seen = params;
            if (config.constraints.unit_norm == Unit::weight_norm) {
                wn = weight_norm_map(params.W);
                seen.W = wn.W;
            }
            if (method.update_statistics)
                method.update_statistics(seen, batch);
            GradResult g = method.grad(seen, batch, rng);
            ++step;
            if (!std::isfinite(g.loss) || !g.dW.allFinite() || (g.dsigma.size() && !g.dsigma.allFinite()))
                throw TrainingDiverged("train: non-finite loss or gradient at epoch " + std::to_string(epoch) +
                                           ", step " + std::to_string(step),
                                       params, epoch, step);
            objective += g.loss;
            ++batches;

            Vec sigma_hat;
            if (config.constraints.sigma_weighted)
                sigma_hat = batch_moments(Mat((batch.rowwise() - batch.colwise().mean()) * seen.W)).var.cwiseSqrt();
            Mat dW = g.dW + regulariser_grad(seen.W, config.constraints, sigma_hat);
            if (config.constraints.unit_norm == Unit::weight_norm)
                dW = wn.backmap(dW);

            opt.begin_step();
            opt.update(0, params.W, dW);
            if (params.sigma.size() > 0 && g.dsigma.size() == params.sigma.size()) {
                opt.update(1, params.sigma, g.dsigma);
                params.sigma = params.sigma.cwiseMax(std::sqrt(kVarianceFloor));
            }
            apply_projections(params.W, config.constraints, rng, result.reinitialised_columns);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.objective = objective / double(std::max<Index>(batches, 1));
        rec.loss = evaluate(params);
        rec.orth_residual = orth_residual(params.W);
        if (!std::isfinite(rec.loss))
            throw TrainingDiverged("train: non-finite evaluation loss at epoch " + std::to_string(epoch), params,
                                   epoch, step);
        result.history.push_back(rec);
        if (rec.loss < result.best_loss) {
            result.best_loss = rec.loss;
            result.best_epoch = epoch;
            if (config.checkpoint == CheckpointPolicy::best_loss)
                result.params = params;
        }
    }
    result.final_params = params;
    if (config.checkpoint == CheckpointPolicy::last) {
        result.params = params;
        result.best_loss = result.history.back().loss;
        result.best_epoch = config.epochs;
    }
    return result;
}

GradCheckReport grad_check(const std::function<double(const Vec&)>& loss, const Vec& theta, const Vec& analytic,
                           double h, double tol, Index max_coords, Rng* rng)
{
    require(theta.size() == analytic.size(), "grad_check: analytic gradient size mismatch");
    require(h > 0.0, "grad_check: h must be > 0");
    std::vector<Index> coords(static_cast<std::size_t>(theta.size()));
    std::iota(coords.begin(), coords.end(), Index(0));
    if (max_coords > 0 && max_coords < theta.size()) {
        require(rng != nullptr, "grad_check: sampling coordinates needs an rng");
        std::shuffle(coords.begin(), coords.end(), *rng);
        coords.resize(std::size_t(max_coords));
        std::sort(coords.begin(), coords.end());
    }
    Vec num(coords.size()), ana(coords.size());
    Vec t = theta;
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const Index c = coords[i];
        const double orig = t(c);
        t(c) = orig + h;
        const double fp = loss(t);
        t(c) = orig - h;
        const double fm = loss(t);
        t(c) = orig;
        num(Index(i)) = (fp - fm) / (2.0 * h);
        ana(Index(i)) = analytic(c);
    }
    GradCheckReport r;
    r.checked = Index(coords.size());
    const double scale = std::max(num.cwiseAbs().maxCoeff(), ana.cwiseAbs().maxCoeff());
    const Vec err = (num - ana).cwiseAbs();
    Index worst = 0;
    const double max_err = r.checked ? err.maxCoeff(&worst) : 0.0;
    r.worst = r.checked ? coords[std::size_t(worst)] : -1;
    r.max_rel_error = scale > 0.0 ? max_err / scale : max_err;
    r.passed = std::isfinite(r.max_rel_error) && r.max_rel_error <= tol;
    return r;
}

}  // namespace spca
