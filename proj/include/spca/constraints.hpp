#ifndef SPCA_CONSTRAINTS_HPP
#define SPCA_CONSTRAINTS_HPP

#include "spca/core.hpp"

#include <functional>
#include <variant>

namespace spca {

// Scales every column to unit Euclidean norm.
// Throws DegenerateColumnError on a column with no direction.
template <typename Derived>
MatrixX<typename Derived::Scalar> project_unit_columns(const Eigen::MatrixBase<Derived>& W)
{
    MatrixX<typename Derived::Scalar> out = W;
    for (Index j = 0; j < out.cols(); ++j) {
        const auto n = out.col(j).norm();
        if (!(n > kDegenerateNorm))
            throw DegenerateColumnError(j, "project_unit_columns: column " + std::to_string(j) +
                                               " has norm " + std::to_string(double(n)));
        out.col(j) /= n;
    }
    return out;
}

// Differentiable weight normalisation W = V / ||V|| column-wise.
// backmap takes dL/dW and returns dL/dV = (I - v v^T/||v||^2) g / ||v|| per column.
struct WeightNorm {
    Mat W;
    std::function<Mat(const Mat&)> backmap;
};

WeightNorm weight_norm_map(const Mat& V);

// Orthogonality regulariser gradients. Column 1 leads: the asymmetric forms
// only push column j away from columns i < j.
template <typename Derived>
MatrixX<typename Derived::Scalar> symmetric_orth_grad(const Eigen::MatrixBase<Derived>& W,
                                                      typename Derived::Scalar alpha)
{
    using S = typename Derived::Scalar;
    // d/dW alpha ||I - W^T W||_F^2
    return S(4) * alpha * W * (W.transpose() * W - MatrixX<S>::Identity(W.cols(), W.cols()));
}

template <typename Derived>
MatrixX<typename Derived::Scalar> asymmetric_orth_grad(const Eigen::MatrixBase<Derived>& W,
                                                       typename Derived::Scalar beta)
{
    // d/dW (beta/2) ||strict_upper([W]_sg^T W)||_F^2
    return beta * W * strict_upper(W.transpose() * W);
}

template <typename Derived, typename DS>
MatrixX<typename Derived::Scalar> asymmetric_sigma_orth_grad(const Eigen::MatrixBase<Derived>& W,
                                                             typename Derived::Scalar beta,
                                                             const Eigen::MatrixBase<DS>& sigma_hat)
{
    // d/dW (beta/2) ||strict_upper(Sigma [W]_sg^T W)||_F^2 with Sigma frozen
    require(sigma_hat.size() == W.cols(), "asymmetric_sigma_orth_grad: sigma size mismatch");
    const auto S = sigma_hat.asDiagonal();
    return beta * (W * S) * strict_upper(S * W.transpose() * W);
}

// Batch mean of x^T y (W^T W - I), y = xW.
template <typename Derived, typename DX>
MatrixX<typename Derived::Scalar> encoder_implicit_grad(const Eigen::MatrixBase<Derived>& W,
                                                        const Eigen::MatrixBase<DX>& X)
{
    using S = typename Derived::Scalar;
    require(X.cols() == W.rows(), "encoder_implicit_grad: shape mismatch");
    const MatrixX<S> Y = X * W;
    return (X.transpose() * Y) * (W.transpose() * W - MatrixX<S>::Identity(W.cols(), W.cols())) /
           S(X.rows());
}

// d/dW (strength/2) sum_j (1 - ||w_j||)^2
Mat unit_norm_reg_grad(const Mat& W, double strength);

struct OrthSymmetric { double alpha = 0.125; };
struct OrthAsymmetric { double beta = 1.0; };
struct OrthAsymmetricSigma { double beta = 1.0; Vec sigma_hat; };
struct OrthEncoderImplicit { Mat X; };
using OrthRegMode = std::variant<OrthSymmetric, OrthAsymmetric, OrthAsymmetricSigma, OrthEncoderImplicit>;

Mat orth_reg_grad(const Mat& W, const OrthRegMode& mode);

// Eigenvalue map of one iterative step, f(l) = l (1 + beta - beta l)^2.
inline double orth_eigen_map(double lambda, double beta)
{
    return (1 + beta) * (1 + beta) * lambda - 2 * (1 + beta) * beta * lambda * lambda +
           beta * beta * lambda * lambda * lambda;
}

inline double orth_eigen_map_derivative(double lambda, double beta)
{
    return (1 + beta) * (1 + beta) - 4 * (1 + beta) * beta * lambda + 3 * beta * beta * lambda * lambda;
}

enum class OrthPrescale {
    columns,   // unit-norm columns first
    spectral,  // divide by the largest singular value; keeps every eigenvalue in (0, 1]
};

struct IterativeOrth {
    double beta = 0.5;
    int max_iter = 50;
    double tol = 1e-10;
    OrthPrescale prescale = OrthPrescale::columns;
};
struct GramSchmidtOrth {};
using OrthMethod = std::variant<IterativeOrth, GramSchmidtOrth>;

struct OrthResult {
    Mat W;
    int iterations = 0;
    bool converged = false;
    double residual = 0.0;  // ||W^T W - I||_F of the returned matrix
};

// Iterative: prescale, then repeat W <- (1+beta) W - beta W W^T W until the
// residual is within tol. Gram-Schmidt throws RankDeficientError.
OrthResult orthogonalize(const Mat& W, const OrthMethod& method = IterativeOrth{});

// Constraint configuration consumed by the trainer.
struct ConstraintSpec {
    enum class UnitNorm { none, project, regularize, weight_norm };
    enum class Orthogonality { none, symmetric_reg, asymmetric_reg, iterative, gram_schmidt };

    UnitNorm unit_norm = UnitNorm::none;
    double unit_norm_strength = 1.0;

    Orthogonality orthogonality = Orthogonality::none;
    double alpha = 0.125;        // symmetric regulariser
    double beta = 0.5;           // asymmetric regulariser strength or iterative step
    bool sigma_weighted = false; // asymmetric regulariser weighted by estimated sigma
    int max_iter = 50;
    double tol = 1e-10;

    void validate() const;
};

}  // namespace spca

#endif
