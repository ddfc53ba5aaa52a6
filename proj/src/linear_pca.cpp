#include "spca/linear_pca.hpp"
#include "spca/linalg.hpp"

#include <cmath>

namespace spca {

namespace {

void check_shapes(const Mat& X, const Mat& W, const char* who)
{
    require(X.rows() >= 1, std::string(who) + ": empty batch");
    require(X.cols() == W.rows(), std::string(who) + ": X is " + shape_str(X.rows(), X.cols()) +
                                      " but W is " + shape_str(W.rows(), W.cols()));
}

// Shared batch quantities of the linear autoencoder.
struct Linear {
    Mat Y;    // xW
    Mat R;    // xWWᵀ - x
    Mat XtY;  // xᵀy / b
    Mat YtY;  // yᵀy / b
    double recon = 0.0;

    Linear(const Mat& X, const Mat& W)
    {
        const double b = double(X.rows());
        Y = X * W;
        R = Y * W.transpose() - X;
        XtY = X.transpose() * Y / b;
        YtY = Y.transpose() * Y / b;
        recon = R.squaredNorm() / b;
    }
};

GradResult from_update(const Mat& update, double recon)
{
    GradResult g;
    g.dW = -update;
    g.recon_error = recon;
    g.loss = 0.5 * recon;
    return g;
}

}  // namespace

WeightingSpec WeightingSpec::linear_spaced(Index k)
{
    require(k >= 1, "WeightingSpec: k must be >= 1");
    WeightingSpec w;
    w.lambdas.resize(k);
    for (Index i = 0; i < k; ++i)
        w.lambdas(i) = double(k - i) / double(k);
    return w;
}

void WeightingSpec::validate() const
{
    require(lambdas.size() >= 1, "WeightingSpec: empty");
    for (Index i = 0; i < lambdas.size(); ++i) {
        require(lambdas(i) > 0.0 && lambdas(i) <= 1.0, "WeightingSpec: lambda outside (0, 1]");
        if (i > 0)
            require(lambdas(i) < lambdas(i - 1), "WeightingSpec: lambdas must be strictly decreasing");
    }
}

double tied_loss(const Mat& X, const Mat& W)
{
    return 0.5 * (X * W * W.transpose() - X).squaredNorm() / double(X.rows());
}

GradResult linear_pca_grad(const Mat& X, const Mat& W, LinearVariant variant)
{
    check_shapes(X, W, "linear_pca_grad");
    const Linear L(X, W);
    const double b = double(X.rows());
    const Mat I = Mat::Identity(W.cols(), W.cols());

    GradResult g;
    g.recon_error = L.recon;
    g.loss = 0.5 * L.recon;
    const Mat decoder = L.R.transpose() * L.Y / b;  // (x̂ - x)ᵀy
    const Mat encoder = L.XtY * (W.transpose() * W - I);
    switch (variant) {
    case LinearVariant::tied_full:
        g.dW = encoder + decoder;
        break;
    case LinearVariant::subspace:
        g.dW = decoder;
        break;
    case LinearVariant::encoder_only:
        g.dW = encoder;
        break;
    }
    return g;
}

GradResult weighted_subspace_grad(const Mat& X, const Mat& W, const WeightingSpec& lambdas,
                                  WeightedVariant variant)
{
    check_shapes(X, W, "weighted_subspace_grad");
    require(lambdas.lambdas.size() == W.cols(), "weighted_subspace_grad: lambda count mismatch");
    require((lambdas.lambdas.array() > 0.0).all(), "weighted_subspace_grad: lambdas must be > 0");
    const Linear L(X, W);
    const Vec& l = lambdas.lambdas;

    switch (variant) {
    case WeightedVariant::v1:
        return from_update(L.XtY - W * L.YtY * l.cwiseInverse().asDiagonal(), L.recon);
    case WeightedVariant::v2: {
        GradResult g = from_update(L.XtY * l.asDiagonal() - W * L.YtY, L.recon);
        // 1/2 E(||x[W]_sg Wᵀ - x||² - ||xWΛ^½||² + ||xW||²)
        const double b = double(X.rows());
        g.loss = 0.5 * (L.recon - (L.Y * l.cwiseSqrt().asDiagonal()).squaredNorm() / b +
                        L.Y.squaredNorm() / b);
        return g;
    }
    case WeightedVariant::v3: {
        const Vec s = l.cwiseSqrt();
        return from_update(L.XtY - W * (s.asDiagonal() * L.YtY * s.cwiseInverse().asDiagonal()), L.recon);
    }
    }
    throw std::logic_error("weighted_subspace_grad: unknown variant");
}

GradResult asymmetric_pca_loss_grad(const Mat& X, const Mat& W, const WeightingSpec& lambdas,
                                    const Vec& sigma_hat)
{
    check_shapes(X, W, "asymmetric_pca_loss_grad");
    require(lambdas.lambdas.size() == W.cols() && sigma_hat.size() == W.cols(),
            "asymmetric_pca_loss_grad: size mismatch");
    const Linear L(X, W);
    const double b = double(X.rows());
    const Vec& l = lambdas.lambdas;
    const Vec s2 = sigma_hat.cwiseAbs2();

    GradResult g;
    g.recon_error = L.recon;
    // 1/2 [ E||x[W]_sg Wᵀ - x||² + ||WΣ̂Λ^½||² - ||WΣ̂||² - E||xWΛ^½||² + E||xW||² ]
    const Vec sl = l.cwiseSqrt();
    g.loss = 0.5 * (L.recon + (W * sigma_hat.asDiagonal() * sl.asDiagonal()).squaredNorm() -
                    (W * sigma_hat.asDiagonal()).squaredNorm() -
                    (L.Y * sl.asDiagonal()).squaredNorm() / b + L.Y.squaredNorm() / b);
    const Vec ones = Vec::Ones(W.cols());
    g.dW = L.R.transpose() * L.Y / b + W * (s2.cwiseProduct(l - ones)).asDiagonal() +
           L.XtY * (ones - l).asDiagonal();
    return g;
}

GradResult gha_grad(const Mat& X, const Mat& W, GhaVariant variant)
{
    check_shapes(X, W, "gha_grad");
    const Linear L(X, W);
    const Mat I = Mat::Identity(W.cols(), W.cols());
    switch (variant) {
    case GhaVariant::plain:
        return from_update(L.XtY - W * upper(L.YtY), L.recon);
    case GhaVariant::with_encoder:
        return from_update(L.XtY - W * upper(L.YtY) - L.XtY * (upper(W.transpose() * W) - I), L.recon);
    case GhaVariant::plus_subspace:
        return from_update(L.XtY - W * upper(L.YtY) - W * off_diagonal(L.YtY), L.recon);
    case GhaVariant::recon_combo: {
        // Tied reconstruction plus the GHA strictly triangular term, with that
        // term frozen; the diagonal would otherwise be counted twice.
        GradResult g = linear_pca_grad(X, W, LinearVariant::tied_full);
        g.dW += W * strict_upper(L.YtY);
        return g;
    }
    }
    throw std::logic_error("gha_grad: unknown variant");
}

Vec nested_cut_probabilities(Index k, double rho)
{
    require(k >= 1, "nested dropout: k must be >= 1");
    require(rho > 0.0 && rho < 1.0, "nested dropout: rho must lie in (0, 1)");
    Vec p(k);
    for (Index j = 0; j < k; ++j)
        p(j) = std::pow(rho, double(j)) * (1.0 - rho);
    return p / p.sum();
}

int sample_nested_cut(Index k, double rho, Rng& rng)
{
    const Vec p = nested_cut_probabilities(k, rho);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = u(rng);
    double acc = 0.0;
    for (Index j = 0; j < k; ++j) {
        acc += p(j);
        if (r < acc)
            return int(j + 1);
    }
    return int(k);
}

GradResult nested_dropout_grad(const Mat& X, const Mat& W, int cut)
{
    check_shapes(X, W, "nested_dropout_grad");
    require(cut >= 1 && cut <= W.cols(), "nested_dropout_grad: cut outside 1..k");
    // (xW ⊙ m)Wᵀ = x (WM)(WM)ᵀ with M = diag(m); the gradient is the tied
    // gradient of WM restricted to the kept columns.
    Mat Wm = Mat::Zero(W.rows(), W.cols());
    Wm.leftCols(cut) = W.leftCols(cut);
    GradResult g = linear_pca_grad(X, Wm, LinearVariant::tied_full);
    g.dW.rightCols(W.cols() - cut).setZero();
    g.cuts = {cut};
    return g;
}

GradResult nested_dropout(const Mat& X, const Mat& W, double rho, Rng& rng)
{
    return nested_dropout_grad(X, W, sample_nested_cut(W.cols(), rho, rng));
}

GradResult weighted_variance_grad(const Mat& X, const Mat& W, const WeightingSpec& lambdas,
                                  double alpha, VarianceWeighting mode, double rho, Rng* rng)
{
    check_shapes(X, W, "weighted_variance_grad");
    require(alpha == 1.0 || alpha == -1.0, "weighted_variance_grad: alpha must be +1 or -1");
    const double b = double(X.rows());
    const Index k = W.cols();
    GradResult g = linear_pca_grad(X, W, LinearVariant::tied_full);
    const Mat Y = X * W;

    // Per-sample weights Λ (b x k); rows are identical except in stochastic mode.
    Mat Lw(X.rows(), k);
    switch (mode) {
    case VarianceWeighting::fixed:
        require(lambdas.lambdas.size() == k, "weighted_variance_grad: lambda count mismatch");
        Lw = lambdas.lambdas.transpose().replicate(X.rows(), 1);
        break;
    case VarianceWeighting::variance_proportional: {
        const Vec e2 = Y.array().square().colwise().mean().transpose();
        const double m = e2.maxCoeff();
        require(m > 0.0, "weighted_variance_grad: all components have zero energy");
        Lw = (e2 / m).transpose().replicate(X.rows(), 1);
        break;
    }
    case VarianceWeighting::stochastic: {
        require(rng != nullptr, "weighted_variance_grad: stochastic mode needs an rng");
        Lw.setZero();
        g.cuts.resize(std::size_t(X.rows()));
        for (Index n = 0; n < X.rows(); ++n) {
            const int cut = sample_nested_cut(k, rho, *rng);
            g.cuts[std::size_t(n)] = cut;
            Lw.row(n).head(cut).setOnes();
        }
        break;
    }
    }
    const Mat YL = Y.cwiseProduct(Lw);
    g.loss -= 0.5 * alpha * Y.cwiseProduct(YL).sum() / b;
    g.dW -= alpha * X.transpose() * YL / b;
    return g;
}

}  // namespace spca
