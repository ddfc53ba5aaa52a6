#include "spca/ica.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spca {

Whitening whiten_pca(const Mat& X, Index k)
{
    require(X.rows() > k, "whiten_pca: need n > k (n=" + std::to_string(X.rows()) + ", k=" + std::to_string(k) + ")");
    Whitening w;
    w.basis = pca_fit_svd<double>(X, k);
    const double top = w.basis.sigma(0);
    for (Index j = 0; j < k; ++j) {
        if (!(w.basis.sigma(j) > 1e-12 * std::max(top, 1.0)))
            throw std::invalid_argument("whiten_pca: component " + std::to_string(j + 1) +
                                        " has zero variance; reduce k");
    }
    w.mean = w.basis.mean;
    w.A = w.basis.W * w.basis.sigma.cwiseInverse().asDiagonal();
    w.Z = (X.rowwise() - w.mean.transpose()) * w.A;
    return w;
}

namespace {

Mat decorrelate(const Mat& V)
{
    IterativeOrth it;
    it.beta = 0.5;
    it.max_iter = 500;
    it.tol = 1e-12;
    it.prescale = OrthPrescale::spectral;
    return orthogonalize(V, it).W;
}

}  // namespace

FastIcaResult fastica(const Mat& Z, const FastIcaOptions& options)
{
    require(options.tol > 0.0 && options.max_iter >= 1, "fastica: tol must be > 0 and max_iter >= 1");
    require(Z.rows() >= 2 && Z.cols() >= 1, "fastica: need at least 2 samples");
    const Index k = Z.cols();
    const double n = double(Z.rows());
    FastIcaResult r;
    r.V = random_semi_orthogonal<double>(k, k, options.seed);
    for (int it = 1; it <= options.max_iter; ++it) {
        const Mat Y = Z * r.V;
        Mat G, Gp;
        if (options.contrast == FastIcaContrast::logcosh) {
            G = Y.array().tanh().matrix();
            Gp = (1.0 - G.array().square()).matrix();
        } else {
            G = Y.array().cube().matrix();
            Gp = (3.0 * Y.array().square()).matrix();
        }
        const Vec mean_gp = Gp.colwise().mean().transpose();
        const Mat next = decorrelate(Z.transpose() * G / n - r.V * mean_gp.asDiagonal());
        const double change = 1.0 - (r.V.transpose() * next).diagonal().cwiseAbs().minCoeff();
        r.V = next;
        r.iterations = it;
        if (change < options.tol) {
            r.converged = true;
            break;
        }
    }
    return r;
}

UnmixingOrder order_by_unmixing_norm(const Mat& B)
{
    UnmixingOrder u;
    const Vec norms = B.colwise().norm().transpose();
    for (Index j = 0; j < norms.size(); ++j) {
        if (!(norms(j) > kDegenerateNorm))
            throw DegenerateColumnError(j, "order_by_unmixing_norm: column " + std::to_string(j + 1) + " is zero");
    }
    const Vec sigma = norms.cwiseInverse();
    u.order = descending_order(sigma);
    u.B_unit.resize(B.rows(), B.cols());
    u.sigma_est.resize(B.cols());
    for (std::size_t j = 0; j < u.order.size(); ++j) {
        const Index src = u.order[j];
        u.B_unit.col(Index(j)) = B.col(src) / norms(src);
        u.sigma_est(Index(j)) = sigma(src);
    }
    return u;
}

namespace {

IcaResult assemble(const Mat& W, const Vec& sigma, const Mat& V, const Vec& mean)
{
    IcaResult r;
    r.W = W;
    r.sigma = sigma;
    r.V = V;
    r.mean = mean;
    r.B = W * sigma.cwiseInverse().asDiagonal() * V;
    UnmixingOrder u = order_by_unmixing_norm(r.B);
    r.B_unit = std::move(u.B_unit);
    r.order = std::move(u.order);
    r.sigma_est = std::move(u.sigma_est);
    return r;
}

// Trains an orthogonal rotation of standardised inputs with the conventional
// nonlinear PCA loss.
TrainResult train_rotation(const Mat& U, const NonlinearitySpec& h, const TrainConfig& config)
{
    const Mat V0 = random_semi_orthogonal<double>(U.cols(), U.cols(), config.seed ^ 0x5bd1e995ULL);
    return train(nlpca_rotation_method(h), DataMatrix<double>(U), Params{V0, Vec()}, config);
}

}  // namespace

IcaResult two_stage_ica(const Mat& X, Index k, const TwoStageOptions& options)
{
    const Whitening w = whiten_pca(X, k);
    Mat V;
    bool converged = true;
    int iterations = 0;
    if (options.rotation == RotationMethod::fastica) {
        FastIcaOptions fo = options.fastica;
        fo.seed = options.seed;
        const FastIcaResult f = fastica(w.Z, fo);
        V = f.V;
        converged = f.converged;
        iterations = f.iterations;
    } else {
        const NlpcaRotationOptions& o = options.nlpca;
        TrainConfig c = default_rotation_config(o.epochs, options.seed);
        c.optimizer = OptimizerConfig::sgd(o.lr, o.momentum);
        c.batch_size = o.batch_size;
        const TrainResult t = train_rotation(w.Z, o.nonlinearity, c);
        V = t.params.W;
        iterations = o.epochs;
    }
    IcaResult r = assemble(w.basis.W, w.basis.sigma, V, w.mean);
    r.converged = converged;
    r.iterations = iterations;
    return r;
}

Mat two_layer_inputs(const SigmaPcaModel& first, const Mat& X)
{
    return sigma_pca_forward(first, X).z;
}

TwoLayerGrad two_layer_nlpca_grad(const TwoLayerState& state, const Mat& X, Rng* rng)
{
    require(state.V.rows() == state.first.k() && state.V.cols() == state.first.k(),
            "two_layer_nlpca_grad: V must be k x k");
    TwoLayerGrad g;
    g.first = sigma_pca_grad(state.first, X, rng);
    g.second = nlpca_rotation_grad(two_layer_inputs(state.first, X), state.V, state.second);
    return g;
}

IcaResult two_layer_fit(const Mat& X, Index k, const TwoLayerOptions& options)
{
    SigmaPcaModel first = options.first;
    if (first.mu_mode == MuMode::precentred)
        first.mu_mode = MuMode::batch;
    const SigmaPcaFit fit = fit_sigma_pca(X, k, first, options.first_config);
    SigmaPcaModel frozen = fit.model;
    frozen.sigma_mode = frozen.sigma_mode == SigmaMode::trainable ? SigmaMode::trainable : SigmaMode::batch;
    if (frozen.mu_mode == MuMode::ema)
        frozen.mu_mode = MuMode::batch;
    const Mat U = two_layer_inputs(frozen, X);
    const TrainResult t = train_rotation(U, options.second, options.second_config);
    const Vec sigma = frozen.sigma_mode == SigmaMode::trainable ? frozen.sigma : estimate_sigma(frozen, X);
    const Vec mean = frozen.mu_mode == MuMode::precentred ? Vec::Zero(X.cols()) : column_means(X);
    IcaResult r = assemble(frozen.W, sigma.cwiseMax(std::sqrt(kVarianceFloor)), t.params.W, mean);
    r.converged = true;
    r.iterations = options.first_config.epochs + options.second_config.epochs;
    return r;
}

Mat easi_step(const Mat& W, const Mat& y, const NonlinearitySpec& h, double eta)
{
    require(W.rows() == W.cols(), "easi_step: W must be square");
    require(y.cols() == W.cols(), "easi_step: y has wrong width");
    const double b = double(y.rows());
    const Mat hy = nonlinearity_eval(h, y).h;
    const Mat I = Mat::Identity(W.cols(), W.cols());
    const Mat C = y.transpose() * y / b - I + (y.transpose() * hy - hy.transpose() * y) / b;
    return W - eta * W * C;
}

IcaResult easi_fit(const Mat& X, Index k, const EasiOptions& options)
{
    require(options.eta > 0.0 && options.batch_size >= 1 && options.epochs >= 0, "easi_fit: invalid options");
    const PcaBasis<double> basis = pca_fit_svd<double>(X, k);
    // A single global scale keeps the step size meaningful without whitening.
    const double scale = basis.sigma(0) > 0.0 ? 1.0 / basis.sigma(0) : 1.0;
    const Mat U = ((X.rowwise() - basis.mean.transpose()) * basis.W) * scale;
    Mat V = Mat::Identity(k, k);
    Rng rng(options.seed);
    std::vector<Index> perm(std::size_t(U.rows()));
    std::iota(perm.begin(), perm.end(), Index(0));
    const Index bs = std::min<Index>(options.batch_size, U.rows());
    Mat batch;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(perm.begin(), perm.end(), rng);
        for (Index start = 0; start < U.rows(); start += bs) {
            const Index len = std::min(bs, U.rows() - start);
            batch.resize(len, k);
            for (Index i = 0; i < len; ++i)
                batch.row(i) = U.row(perm[std::size_t(start + i)]);
            V = easi_step(V, Mat(batch * V), options.h, options.eta);
            if (!V.allFinite())
                throw std::runtime_error("easi_fit: diverged at epoch " + std::to_string(epoch + 1));
        }
    }
    // B = W_pca V scale, expressed through sigma so that B = W Σ⁻¹ V.
    const Vec sigma = Vec::Constant(k, 1.0 / scale);
    IcaResult r = assemble(basis.W, sigma, V, basis.mean);
    r.converged = true;
    r.iterations = options.epochs;
    return r;
}

}  // namespace spca
