#ifndef SPCA_LINALG_HPP
#define SPCA_LINALG_HPP

#include "spca/core.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <optional>

namespace spca {

// n x p samples, one observation per row. Rejects non-finite entries.
template <typename Scalar = double>
class DataMatrix {
public:
    DataMatrix() = default;
    explicit DataMatrix(MatrixX<Scalar> values) : values_(std::move(values))
    {
        require(values_.allFinite(), "DataMatrix: non-finite entry");
    }

    const MatrixX<Scalar>& values() const { return values_; }
    Index n() const { return values_.rows(); }
    Index p() const { return values_.cols(); }

private:
    MatrixX<Scalar> values_;
};

template <typename Scalar = double>
struct SvdResult {
    MatrixX<Scalar> U;  // n x k
    VectorX<Scalar> S;  // k, descending
    MatrixX<Scalar> V;  // p x k
};

template <typename Scalar = double>
struct PcaBasis {
    MatrixX<Scalar> W;      // p x k principal axes
    VectorX<Scalar> sigma;  // k standard deviations, descending
    VectorX<Scalar> mean;   // p
};

template <typename Scalar = double>
struct Moments {
    VectorX<Scalar> mu;
    VectorX<Scalar> var;
};

// Exponential moving average of batch moments. Empty until the first update.
template <typename Scalar = double>
struct MomentState {
    VectorX<Scalar> mu_hat;
    VectorX<Scalar> var_hat;
    Scalar alpha = Scalar(0.9);
    Scalar eps = Scalar(kVarianceFloor);

    bool initialised() const { return mu_hat.size() > 0; }
};

// Column means and biased (1/n) variances.
template <typename Derived>
Moments<typename Derived::Scalar> batch_moments(const Eigen::MatrixBase<Derived>& Y)
{
    using Scalar = typename Derived::Scalar;
    require(Y.rows() >= 1, "batch_moments: empty batch");
    const Scalar n = Scalar(Y.rows());
    Moments<Scalar> m;
    m.mu = Y.colwise().sum().transpose() / n;
    m.var = (Y.rowwise() - m.mu.transpose()).array().square().colwise().sum().transpose() / n;
    return m;
}

// Folds a batch into the running state and returns the updated estimates.
// A fresh state adopts the first batch verbatim.
template <typename Derived>
Moments<typename Derived::Scalar> ema_update(MomentState<typename Derived::Scalar>& state,
                                             const Eigen::MatrixBase<Derived>& Y)
{
    using Scalar = typename Derived::Scalar;
    require(state.alpha >= Scalar(0) && state.alpha < Scalar(1), "ema_update: alpha outside [0,1)");
    Moments<Scalar> b = batch_moments(Y);
    if (!state.initialised()) {
        state.mu_hat = b.mu;
        state.var_hat = b.var;
    } else {
        require(state.mu_hat.size() == b.mu.size(), "ema_update: dimension mismatch");
        state.mu_hat = state.alpha * state.mu_hat + (Scalar(1) - state.alpha) * b.mu;
        state.var_hat = state.alpha * state.var_hat + (Scalar(1) - state.alpha) * b.var;
    }
    return {state.mu_hat, state.var_hat};
}

// sqrt(max(var, eps)) per entry.
template <typename Derived>
VectorX<typename Derived::Scalar> floored_std(const Eigen::MatrixBase<Derived>& var,
                                              typename Derived::Scalar eps = kVarianceFloor)
{
    return var.array().max(eps).sqrt().matrix();
}

template <typename Derived>
VectorX<typename Derived::Scalar> column_means(const Eigen::MatrixBase<Derived>& X)
{
    return X.colwise().mean().transpose();
}

template <typename Derived>
MatrixX<typename Derived::Scalar> centred(const Eigen::MatrixBase<Derived>& X)
{
    return X.rowwise() - X.colwise().mean();
}

// Thin SVD truncated to rank k. Each column of V is signed so its
// largest-magnitude entry is positive (first such entry on ties); U follows.
template <typename Scalar>
SvdResult<Scalar> svd_thin(const MatrixX<Scalar>& X, Index k)
{
    require(k >= 1, "svd_thin: k must be >= 1");
    require(k <= std::min(X.rows(), X.cols()),
            "svd_thin: rank " + std::to_string(k) + " exceeds min dimension of " +
                shape_str(X.rows(), X.cols()));
    require(X.allFinite(), "svd_thin: non-finite input");

    Eigen::BDCSVD<MatrixX<Scalar>> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SvdResult<Scalar> r;
    r.U = svd.matrixU().leftCols(k);
    r.S = svd.singularValues().head(k);
    r.V = svd.matrixV().leftCols(k);
    for (Index j = 0; j < k; ++j) {
        Index arg = 0;
        r.V.col(j).cwiseAbs().maxCoeff(&arg);
        if (r.V(arg, j) < Scalar(0)) {
            r.V.col(j) = -r.V.col(j);
            r.U.col(j) = -r.U.col(j);
        }
    }
    return r;
}

template <typename Scalar>
SvdResult<Scalar> svd_thin(const DataMatrix<Scalar>& X, Index k)
{
    return svd_thin<Scalar>(X.values(), k);
}

// PCA of the column-centred data: W = V, sigma = S / sqrt(n).
template <typename Scalar>
PcaBasis<Scalar> pca_fit_svd(const MatrixX<Scalar>& X, Index k)
{
    require(X.rows() >= 2, "pca_fit_svd: need at least 2 samples");
    require(k >= 1 && k <= X.cols(),
            "pca_fit_svd: k=" + std::to_string(k) + " outside [1, p=" + std::to_string(X.cols()) + "]");
    PcaBasis<Scalar> basis;
    basis.mean = column_means(X);
    const MatrixX<Scalar> Xc = X.rowwise() - basis.mean.transpose();
    SvdResult<Scalar> s = svd_thin<Scalar>(Xc, k);
    basis.W = s.V;
    basis.sigma = s.S / std::sqrt(Scalar(X.rows()));
    return basis;
}

template <typename Scalar>
PcaBasis<Scalar> pca_fit_svd(const DataMatrix<Scalar>& X, Index k)
{
    return pca_fit_svd<Scalar>(X.values(), k);
}

// Orthonormalised standard-normal draw, p x k. QR signs are fixed so the
// result depends only on the draw.
template <typename Scalar = double>
MatrixX<Scalar> random_semi_orthogonal(Index p, Index k, Rng& rng)
{
    require(k >= 1 && k <= p, "random_semi_orthogonal: need 1 <= k <= p, got k=" +
                                  std::to_string(k) + " p=" + std::to_string(p));
    const MatrixX<Scalar> G = randn<Scalar>(p, k, rng);
    Eigen::HouseholderQR<MatrixX<Scalar>> qr(G);
    MatrixX<Scalar> Q = qr.householderQ() * MatrixX<Scalar>::Identity(p, k);
    const MatrixX<Scalar>& R = qr.matrixQR();
    for (Index j = 0; j < k; ++j)
        if (R(j, j) < Scalar(0))
            Q.col(j) = -Q.col(j);
    return Q;
}

template <typename Scalar = double>
MatrixX<Scalar> random_semi_orthogonal(Index p, Index k, std::uint64_t seed)
{
    Rng rng(seed);
    return random_semi_orthogonal<Scalar>(p, k, rng);
}

// ||W^T W - I||_F
template <typename Derived>
typename Derived::Scalar orth_residual(const Eigen::MatrixBase<Derived>& W)
{
    using Scalar = typename Derived::Scalar;
    return (W.transpose() * W - MatrixX<Scalar>::Identity(W.cols(), W.cols())).norm();
}

// ||A A^T - B B^T||_F, the distance between the spans of orthonormal A and B.
template <typename DA, typename DB>
typename DA::Scalar projector_distance(const Eigen::MatrixBase<DA>& A, const Eigen::MatrixBase<DB>& B)
{
    return (A * A.transpose() - B * B.transpose()).norm();
}

// Absolute cosine between matching columns.
template <typename DA, typename DB>
VectorX<typename DA::Scalar> column_abs_cos(const Eigen::MatrixBase<DA>& A, const Eigen::MatrixBase<DB>& B)
{
    using Scalar = typename DA::Scalar;
    require(A.cols() == B.cols() && A.rows() == B.rows(), "column_abs_cos: shape mismatch");
    VectorX<Scalar> c(A.cols());
    for (Index j = 0; j < A.cols(); ++j) {
        const Scalar na = A.col(j).norm();
        const Scalar nb = B.col(j).norm();
        c(j) = (na > Scalar(0) && nb > Scalar(0)) ? std::abs(A.col(j).dot(B.col(j))) / (na * nb) : Scalar(0);
    }
    return c;
}

extern template SvdResult<double> svd_thin<double>(const MatrixX<double>&, Index);
extern template PcaBasis<double> pca_fit_svd<double>(const MatrixX<double>&, Index);
extern template MatrixX<double> random_semi_orthogonal<double>(Index, Index, Rng&);

}  // namespace spca

#endif
