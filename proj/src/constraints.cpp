#include "spca/constraints.hpp"
#include "spca/linalg.hpp"

#include <cmath>

namespace spca {

WeightNorm weight_norm_map(const Mat& V)
{
    const Vec norms = V.colwise().norm().transpose();
    for (Index j = 0; j < V.cols(); ++j)
        if (!(norms(j) > kDegenerateNorm))
            throw DegenerateColumnError(j, "weight_norm_map: zero column " + std::to_string(j));
    WeightNorm out;
    out.W = V * norms.cwiseInverse().asDiagonal();
    out.backmap = [V, norms](const Mat& G) {
        require(G.rows() == V.rows() && G.cols() == V.cols(), "weight_norm backmap: shape mismatch");
        Mat out(G.rows(), G.cols());
        for (Index j = 0; j < V.cols(); ++j) {
            const double n2 = norms(j) * norms(j);
            out.col(j) = (G.col(j) - V.col(j) * (V.col(j).dot(G.col(j)) / n2)) / norms(j);
        }
        return out;
    };
    return out;
}

Mat unit_norm_reg_grad(const Mat& W, double strength)
{
    Mat g(W.rows(), W.cols());
    for (Index j = 0; j < W.cols(); ++j) {
        const double n = W.col(j).norm();
        if (!(n > kDegenerateNorm))
            throw DegenerateColumnError(j, "unit_norm_reg_grad: zero column " + std::to_string(j));
        g.col(j) = strength * (1.0 - 1.0 / n) * W.col(j);
    }
    return g;
}

Mat orth_reg_grad(const Mat& W, const OrthRegMode& mode)
{
    return std::visit(
        [&](const auto& m) -> Mat {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, OrthSymmetric>)
                return symmetric_orth_grad(W, m.alpha);
            else if constexpr (std::is_same_v<M, OrthAsymmetric>)
                return asymmetric_orth_grad(W, m.beta);
            else if constexpr (std::is_same_v<M, OrthAsymmetricSigma>)
                return asymmetric_sigma_orth_grad(W, m.beta, m.sigma_hat);
            else
                return encoder_implicit_grad(W, m.X);
        },
        mode);
}

namespace {

OrthResult iterate(const Mat& W0, const IterativeOrth& it)
{
    require(it.beta > 0.0 && it.beta <= 0.5, "orthogonalize: iterative beta must lie in (0, 1/2]");
    require(it.max_iter >= 0, "orthogonalize: max_iter must be >= 0");
    OrthResult r;
    if (it.prescale == OrthPrescale::columns) {
        r.W = project_unit_columns(W0);
    } else {
        const double s = Eigen::JacobiSVD<Mat>(W0).singularValues()(0);
        if (!(s > kDegenerateNorm))
            throw DegenerateColumnError(0, "orthogonalize: zero matrix");
        r.W = W0 / s;
    }
    const Mat I = Mat::Identity(W0.cols(), W0.cols());
    r.residual = (r.W.transpose() * r.W - I).norm();
    while (r.residual > it.tol && r.iterations < it.max_iter) {
        r.W = (1.0 + it.beta) * r.W - it.beta * r.W * (r.W.transpose() * r.W);
        ++r.iterations;
        r.residual = (r.W.transpose() * r.W - I).norm();
    }
    r.converged = r.residual <= it.tol;
    return r;
}

OrthResult gram_schmidt(const Mat& W0)
{
    OrthResult r;
    r.W = W0;
    for (Index j = 0; j < W0.cols(); ++j) {
        const double original = W0.col(j).norm();
        // Two passes keep the result orthonormal to working precision.
        for (int pass = 0; pass < 2; ++pass)
            for (Index i = 0; i < j; ++i)
                r.W.col(j) -= r.W.col(i) * r.W.col(i).dot(r.W.col(j));
        const double n = r.W.col(j).norm();
        if (!(original > kDegenerateNorm) || n <= 1e-10 * original)
            throw RankDeficientError("gram_schmidt: column " + std::to_string(j) +
                                     " lies in the span of the previous columns");
        r.W.col(j) /= n;
    }
    r.residual = orth_residual(r.W);
    r.converged = true;
    return r;
}

}  // namespace

OrthResult orthogonalize(const Mat& W, const OrthMethod& method)
{
    if (const auto* it = std::get_if<IterativeOrth>(&method))
        return iterate(W, *it);
    return gram_schmidt(W);
}

void ConstraintSpec::validate() const
{
    if (unit_norm == UnitNorm::regularize)
        require(unit_norm_strength > 0.0, "constraints: unit_norm_strength must be > 0");
    switch (orthogonality) {
    case Orthogonality::symmetric_reg:
        require(alpha > 0.0, "constraints: alpha must be > 0");
        break;
    case Orthogonality::asymmetric_reg:
        require(beta > 0.0, "constraints: beta must be > 0");
        break;
    case Orthogonality::iterative:
        require(beta > 0.0 && beta <= 0.5, "constraints: iterative beta must lie in (0, 1/2]");
        require(max_iter >= 1, "constraints: max_iter must be >= 1");
        require(tol > 0.0, "constraints: tol must be > 0");
        break;
    default:
        break;
    }
}

}  // namespace spca
