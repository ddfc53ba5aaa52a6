#include "spca/sigma_pca.hpp"

#include <cmath>
#include <numeric>

namespace spca {

namespace {

const double kSigmaFloor = std::sqrt(kVarianceFloor);

Vec resolve_mu(const SigmaPcaModel& m, const Mat& X)
{
    switch (m.mu_mode) {
    case MuMode::precentred:
        return Vec::Zero(X.cols());
    case MuMode::batch:
        return column_means(X);
    case MuMode::ema:
        if (m.mu_state.initialised())
            return m.mu_state.mu_hat;
        return column_means(X);
    }
    return Vec::Zero(X.cols());
}

Vec resolve_sigma(const SigmaPcaModel& m, const Mat& y, bool& floored)
{
    Vec var;
    if (m.decoder_mode == DecoderMode::conventional)
        return Vec::Ones(y.cols());
    switch (m.sigma_mode) {
    case SigmaMode::batch:
        var = batch_moments(y).var;
        break;
    case SigmaMode::ema:
        var = m.sigma_state.initialised() ? m.sigma_state.var_hat : batch_moments(y).var;
        break;
    case SigmaMode::trainable: {
        require(m.sigma.size() == y.cols(), "sigma_pca: trainable sigma has wrong size");
        floored = (m.sigma.array() < kSigmaFloor).any();
        return m.sigma.cwiseMax(kSigmaFloor);
    }
    }
    floored = (var.array() < kVarianceFloor).any();
    return floored_std(var);
}

Mat deflation_projector(const Mat& W)
{
    return Mat::Identity(W.cols(), W.cols()) - strict_upper(W.transpose() * W);
}

double sigma_norm(const Vec& s, SigmaNorm kind)
{
    switch (kind) {
    case SigmaNorm::spectral: return s.cwiseAbs().maxCoeff();
    case SigmaNorm::frobenius: return s.norm();
    case SigmaNorm::nuclear: return s.cwiseAbs().sum();
    }
    return s.norm();
}

void refresh_reconstruction(const SigmaPcaModel& m, ForwardCache& c)
{
    c.xhat = (c.hz * c.sigma.asDiagonal()) * m.W.transpose();
    c.yhat = c.xhat * m.W;
    c.xhat.rowwise() += c.mu.transpose();
}

// Residual x̂ - x in centred coordinates.
Mat residual(const ForwardCache& c)
{
    return (c.xhat.rowwise() - c.mu.transpose()) - c.xc;
}

// Gradient of the ordering-free model for a given cache.
GradResult main_terms(const SigmaPcaModel& m, const ForwardCache& c)
{
    const double b = double(c.xc.rows());
    const Mat r = residual(c);
    const Mat g = (r * m.W).cwiseProduct(c.dh);  // (ŷ - y) ⊙ h'
    const Mat enc = c.xc.transpose() * g * c.P.transpose() / b;
    GradResult out;
    out.recon_error = r.squaredNorm() / b;
    out.loss = 0.5 * out.recon_error;
    switch (m.decoder_mode) {
    case DecoderMode::stopgrad:
        out.dW = enc;
        break;
    case DecoderMode::full:
    case DecoderMode::conventional:
        out.dW = enc + r.transpose() * (c.hz * c.sigma.asDiagonal()) / b;
        break;
    case DecoderMode::rescaled: {
        const double s = sigma_norm(c.sigma, m.rescale_norm);
        out.dW = enc + r.transpose() * (c.hz * c.sigma.asDiagonal()) / (b * s);
        out.loss *= 1.0 + 1.0 / s;
        break;
    }
    case DecoderMode::sigma_dropped:
        out.dW = enc + r.transpose() * c.hz / b;
        break;
    case DecoderMode::encoder_scaled:
        out.dW = enc * c.sigma.asDiagonal() + r.transpose() * (c.hz * c.sigma.asDiagonal()) / b;
        break;
    }
    return out;
}

ForwardCache masked(const SigmaPcaModel& m, ForwardCache c, int cut)
{
    const Index drop = c.hz.cols() - cut;
    c.hz.rightCols(drop).setZero();
    c.dh.rightCols(drop).setZero();
    refresh_reconstruction(m, c);
    return c;
}

Mat nested_grad(const SigmaPcaModel& m, const ForwardCache& c, int cut, double* loss)
{
    const ForwardCache mc = masked(m, c, cut);
    GradResult g = main_terms(m, mc);
    const Mat E = m.W.transpose() * m.W - Mat::Identity(m.k(), m.k());
    if (loss)
        *loss = g.loss + 0.5 * m.nested_orth * E.squaredNorm();
    return g.dW + 2.0 * m.nested_orth * m.W * E;
}

}  // namespace

void SigmaPcaModel::validate() const
{
    require(W.rows() >= 1 && W.cols() >= 1, "sigma_pca: empty W");
    require(W.allFinite(), "sigma_pca: non-finite W");
    nonlinearity.validate();
    if (sigma_mode == SigmaMode::trainable) {
        require(sigma.size() == W.cols(), "sigma_pca: trainable sigma needs k values");
        require(sigma_l2 >= 0.0, "sigma_pca: sigma_l2 must be >= 0");
    }
    if (ordering == Ordering::triangular)
        require(triangular_variant >= 1 && triangular_variant <= 6, "sigma_pca: triangular variant must be 1..6");
    if (ordering == Ordering::weighted_latent) {
        require(ordering_weights.lambdas.size() == W.cols(), "sigma_pca: ordering weights need k values");
        ordering_weights.validate();
    }
    if (ordering == Ordering::nested)
        require(nested_rho > 0.0 && nested_rho < 1.0, "sigma_pca: nested rho must lie in (0, 1)");
    require(compensation >= 0.0, "sigma_pca: compensation must be >= 0");
}

void update_statistics(SigmaPcaModel& model, const Mat& X)
{
    if (model.mu_mode == MuMode::ema)
        ema_update(model.mu_state, X);
    if (model.sigma_mode == SigmaMode::ema && model.decoder_mode != DecoderMode::conventional) {
        const Vec mu = resolve_mu(model, X);
        Mat y = (X.rowwise() - mu.transpose()) * model.W;
        if (model.ordering == Ordering::projective_deflation)
            y = y * deflation_projector(model.W);
        ema_update(model.sigma_state, y);
    }
}

ForwardCache sigma_pca_forward(const SigmaPcaModel& model, const Mat& X)
{
    require(X.cols() == model.p(), "sigma_pca_forward: X has " + std::to_string(X.cols()) +
                                       " columns, W has " + std::to_string(model.p()) + " rows");
    require(X.rows() >= 1, "sigma_pca_forward: empty batch");
    ForwardCache c;
    c.mu = resolve_mu(model, X);
    c.xc = X.rowwise() - c.mu.transpose();
    c.y_pre = c.xc * model.W;
    c.P = model.ordering == Ordering::projective_deflation ? deflation_projector(model.W)
                                                          : Mat::Identity(model.k(), model.k());
    c.y = c.y_pre * c.P;
    c.sigma = resolve_sigma(model, c.y, c.sigma_floored);
    c.z = c.y * c.sigma.cwiseInverse().asDiagonal();
    Activation a = nonlinearity_eval(model.nonlinearity, c.z);
    c.hz = std::move(a.h);
    c.dh = std::move(a.dh);
    refresh_reconstruction(model, c);
    return c;
}

Vec trainable_sigma_grad(const ForwardCache& c, const Vec& sigma, double l2)
{
    require(sigma.size() == c.z.cols(), "trainable_sigma_grad: size mismatch");
    const double b = double(c.z.rows());
    const Mat delta = c.yhat - c.y_pre;  // (x̂ - x)W
    const Mat dz = c.hz - c.z.cwiseProduct(c.dh);
    return delta.cwiseProduct(dz).colwise().sum().transpose() / b + 2.0 * l2 * sigma;
}

Mat ordering_term_grad(const SigmaPcaModel& m, const ForwardCache& c, int cut)
{
    const double b = double(c.xc.rows());
    switch (m.ordering) {
    case Ordering::none:
        return Mat::Zero(m.p(), m.k());
    case Ordering::projective_deflation: {
        const Mat g = (residual(c) * m.W).cwiseProduct(c.dh);
        return -m.W * strict_lower(g.transpose() * c.y_pre) / b;
    }
    case Ordering::triangular: {
        const Mat hs = c.hz * c.sigma.asDiagonal();
        Mat M;
        switch (m.triangular_variant) {
        case 1: M = hs.transpose() * c.hz; break;
        case 2: M = c.hz.transpose() * hs; break;
        case 3: M = c.hz.transpose() * c.y; break;
        case 4: M = c.y.transpose() * c.hz; break;
        case 5: M = c.z.transpose() * c.y; break;
        case 6: M = c.y.transpose() * c.z; break;
        default: throw std::invalid_argument("ordering_term_grad: triangular variant must be 1..6");
        }
        return m.W * strict_upper(M) / b;
    }
    case Ordering::weighted_latent: {
        const auto L = m.ordering_weights.lambdas.asDiagonal();
        const Mat update = (c.xc.transpose() * c.y * L -
                            c.xc.transpose() * (c.hz * c.sigma.asDiagonal()) * L * (m.W.transpose() * m.W)) / b;
        return -update - main_terms(m, c).dW;
    }
    case Ordering::nested:
        require(cut >= 1 && cut <= m.k(), "ordering_term_grad: nested ordering needs a cut in 1..k");
        return nested_grad(m, c, cut, nullptr);
    }
    return Mat::Zero(m.p(), m.k());
}

GradResult sigma_pca_grad(const SigmaPcaModel& model, const Mat& X, Rng* rng)
{
    model.validate();
    const ForwardCache c = sigma_pca_forward(model, X);
    GradResult out;
    if (model.ordering == Ordering::nested) {
        require(rng != nullptr, "sigma_pca_grad: nested ordering needs an rng");
        const int cut = sample_nested_cut(model.k(), model.nested_rho, *rng);
        out.dW = nested_grad(model, c, cut, &out.loss);
        out.recon_error = residual(masked(model, c, cut)).squaredNorm() / double(X.rows());
        out.cuts = {cut};
        if (model.sigma_mode == SigmaMode::trainable) {
            out.dsigma = trainable_sigma_grad(masked(model, c, cut), c.sigma, model.sigma_l2);
            out.loss += model.sigma_l2 * model.sigma.squaredNorm();
        }
    } else {
        out = main_terms(model, c);
        if (model.ordering != Ordering::none)
            out.dW += ordering_term_grad(model, c);
        if (model.sigma_mode == SigmaMode::trainable && model.decoder_mode != DecoderMode::conventional) {
            out.dsigma = trainable_sigma_grad(c, c.sigma, model.sigma_l2);
            out.loss += model.sigma_l2 * model.sigma.squaredNorm();
        }
    }
    if (model.compensation > 0.0) {
        const double b = double(X.rows());
        const Mat I = Mat::Identity(model.k(), model.k());
        out.dW += model.compensation * c.xc.transpose() * c.y_pre * (model.W.transpose() * model.W - I) / b;
        out.loss += 0.5 * model.compensation * (c.y_pre * model.W.transpose() - c.xc).squaredNorm() / b;
    }
    return out;
}

GradResult latent_recon_grad(const SigmaPcaModel& model, const Mat& X, LatentVariant variant, double beta)
{
    require(beta >= 0.0, "latent_recon_grad: beta must be >= 0");
    const ForwardCache c = sigma_pca_forward(model, X);
    const double b = double(X.rows());
    const Mat& W = model.W;
    const Mat WtW = W.transpose() * W;
    const Mat I = Mat::Identity(model.k(), model.k());
    Mat K;
    switch (variant) {
    case LatentVariant::wtw_symreg: K = WtW; break;
    case LatentVariant::tri_wtw_symreg: K = lower(WtW); break;
    case LatentVariant::plain_orthreg:
    case LatentVariant::plus_linear: K = I; break;
    }
    const Mat e = c.y - c.hz * c.sigma.asDiagonal() * K;
    GradResult out;
    out.recon_error = residual(c).squaredNorm() / b;
    out.loss = e.squaredNorm() / b;
    out.dW = -2.0 * c.xc.transpose() * (e * K.transpose()).cwiseProduct(c.dh) / b;
    if (variant == LatentVariant::plus_linear) {
        const Mat R = c.y * W.transpose() - c.xc;
        out.loss += R.squaredNorm() / b;
        out.dW += 2.0 * c.xc.transpose() * R * W / b;
    } else {
        out.loss += beta * (I - WtW).squaredNorm();
        out.dW += 4.0 * beta * W * (WtW - I);
    }
    return out;
}

GradResult rica_grad(const Mat& X, const Mat& W, const RicaSpec& spec)
{
    require(X.cols() == W.rows(), "rica_grad: shape mismatch");
    require(spec.beta >= 0.0, "rica_grad: beta must be >= 0");
    if (spec.adaptive)
        require(spec.beta <= 1.0, "rica_grad: beta0 must lie in [0, 1]");
    const double b = double(X.rows());
    const double beta = spec.adaptive ? spec.beta * X.rowwise().norm().mean() : spec.beta;
    const Mat Y = X * W;
    const Mat R = Y * W.transpose() - X;
    GradResult out;
    out.recon_error = R.squaredNorm() / b;
    Mat G;
    double penalty = 0.0;
    if (spec.penalty == RicaPenalty::l1) {
        G = Y.array().sign().matrix();
        penalty = Y.cwiseAbs().sum() / b;
    } else {
        G = Y.array().tanh().matrix();
        // log cosh(y) = |y| + log1p(exp(-2|y|)) - log 2, stable for large |y|
        const Eigen::ArrayXXd a = Y.array().abs();
        penalty = (a + (-2.0 * a).exp().log1p() - std::log(2.0)).sum() / b;
    }
    out.loss = 0.5 * out.recon_error + beta * penalty;
    out.dW = (R.transpose() * Y + beta * X.transpose() * G) / b;
    return out;
}

GradResult skew_symmetric_grad(const Mat& X, const Mat& W, const NonlinearitySpec& h, SkewBeta beta_mode,
                               SkewForm form, double beta)
{
    require(X.cols() == W.rows(), "skew_symmetric_grad: shape mismatch");
    const double b = double(X.rows());
    const Mat Y = X * W;
    const Mat R = Y * W.transpose() - X;
    Vec sigma = Vec::Ones(W.cols());
    double coef = beta;
    if (beta_mode == SkewBeta::input_norm)
        coef = X.rowwise().norm().mean();
    else if (beta_mode == SkewBeta::sigma_comp) {
        sigma = floored_std(batch_moments(Y).var);
        coef = 1.0;
    }
    const Mat H = nonlinearity_eval(h, Y * sigma.cwiseInverse().asDiagonal()).h;
    Mat M = Y.transpose() * H / b;
    if (form == SkewForm::dediag)
        M.diagonal() -= Y.cwiseProduct(H).colwise().sum().transpose() / b;
    else
        M -= H.transpose() * Y / b;
    const Mat term = coef * W * M * sigma.asDiagonal();  // frozen
    GradResult out;
    out.recon_error = R.squaredNorm() / b;
    out.loss = 0.5 * out.recon_error + W.cwiseProduct(term).sum();
    out.dW = R.transpose() * Y / b + term;
    return out;
}

GradResult noncentred_grad(const SigmaPcaModel& model, const Mat& X, NoncentredVariant variant)
{
    require(model.mu_mode != MuMode::precentred, "noncentred_grad: mean mode must not be precentred");
    require(X.cols() == model.p(), "noncentred_grad: shape mismatch");
    const double b = double(X.rows());
    const Mat& W = model.W;
    const Vec mu_x = column_means(X);
    const Mat Yraw = X * W;
    const Vec mu_y = column_means(Yraw);
    const Mat yc = Yraw.rowwise() - mu_y.transpose();
    bool floored = false;
    const Vec sigma = resolve_sigma(model, yc, floored);
    const Mat z = yc * sigma.cwiseInverse().asDiagonal();
    const Activation a = nonlinearity_eval(model.nonlinearity, z);
    Mat rec = a.h * sigma.asDiagonal();
    Mat target = X;
    if (variant == NoncentredVariant::wrap)
        rec.rowwise() += mu_y.transpose();
    else
        target.rowwise() -= mu_x.transpose();
    const Mat r = rec * W.transpose() - target;
    const Mat g = (r * W).cwiseProduct(a.dh);
    GradResult out;
    out.recon_error = r.squaredNorm() / b;
    out.loss = 0.5 * out.recon_error;
    out.dW = X.transpose() * g / b;
    if (variant == NoncentredVariant::bound) {
        const Mat m = mu_x.transpose();
        const GradResult t = linear_pca_grad(m, W, LinearVariant::tied_full);
        out.loss += t.loss;
        out.dW += t.dW;
    }
    return out;
}

std::pair<SigmaPcaModel, std::vector<Index>> sort_components(const SigmaPcaModel& model)
{
    require(model.sigma.size() == model.k(), "sort_components: sigma estimates missing");
    const std::vector<Index> order = descending_order(model.sigma);
    SigmaPcaModel out = model;
    for (std::size_t j = 0; j < order.size(); ++j) {
        out.W.col(Index(j)) = model.W.col(order[j]);
        out.sigma(Index(j)) = model.sigma(order[j]);
        if (model.sigma_state.initialised()) {
            out.sigma_state.mu_hat(Index(j)) = model.sigma_state.mu_hat(order[j]);
            out.sigma_state.var_hat(Index(j)) = model.sigma_state.var_hat(order[j]);
        }
    }
    return {out, order};
}

Vec estimate_sigma(const SigmaPcaModel& model, const Mat& X)
{
    require(X.cols() == model.p(), "estimate_sigma: shape mismatch");
    Vec mu = model.mu_mode == MuMode::precentred ? Vec::Zero(X.cols()) : column_means(X);
    Mat y = (X.rowwise() - mu.transpose()) * model.W;
    if (model.ordering == Ordering::projective_deflation)
        y = y * deflation_projector(model.W);
    return batch_moments(y).var.cwiseSqrt();
}

double sigma_pca_recon_error(const SigmaPcaModel& model, const Mat& X)
{
    const ForwardCache c = sigma_pca_forward(model, X);
    return (c.xhat - X).squaredNorm() / double(X.rows());
}

}  // namespace spca
