#ifndef SPCA_CORE_HPP
#define SPCA_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace spca {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Mat = MatrixX<double>;
using Vec = VectorX<double>;
using Index = Eigen::Index;

// Engine choice is part of the determinism contract; do not swap it.
using Rng = std::mt19937_64;

// Floor on variances wherever a standard deviation gets inverted.
inline constexpr double kVarianceFloor = 1e-9;

// A column whose norm is below this is treated as having no direction.
inline constexpr double kDegenerateNorm = 1e-20;

class DegenerateColumnError : public std::runtime_error {
public:
    DegenerateColumnError(Index column, const std::string& what)
        : std::runtime_error(what), column_(column) {}
    Index column() const { return column_; }

private:
    Index column_;
};

class RankDeficientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Triangular parts of a square matrix. lower/upper keep the diagonal,
// the strict_ forms drop it.
template <typename Derived>
MatrixX<typename Derived::Scalar> lower(const Eigen::MatrixBase<Derived>& m)
{
    return m.template triangularView<Eigen::Lower>();
}

template <typename Derived>
MatrixX<typename Derived::Scalar> upper(const Eigen::MatrixBase<Derived>& m)
{
    return m.template triangularView<Eigen::Upper>();
}

template <typename Derived>
MatrixX<typename Derived::Scalar> strict_lower(const Eigen::MatrixBase<Derived>& m)
{
    return m.template triangularView<Eigen::StrictlyLower>();
}

template <typename Derived>
MatrixX<typename Derived::Scalar> strict_upper(const Eigen::MatrixBase<Derived>& m)
{
    return m.template triangularView<Eigen::StrictlyUpper>();
}

template <typename Derived>
MatrixX<typename Derived::Scalar> off_diagonal(const Eigen::MatrixBase<Derived>& m)
{
    MatrixX<typename Derived::Scalar> out = m;
    out.diagonal().setZero();
    return out;
}

template <typename Scalar = double>
MatrixX<Scalar> randn(Index rows, Index cols, Rng& rng)
{
    std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
    MatrixX<Scalar> out(rows, cols);
    // Fill in row-major order so the draw sequence does not depend on storage.
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            out(i, j) = normal(rng);
    return out;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m)
{
    return m.allFinite();
}

inline void require(bool condition, const std::string& message)
{
    if (!condition)
        throw std::invalid_argument(message);
}

inline std::string shape_str(Index r, Index c)
{
    return std::to_string(r) + "x" + std::to_string(c);
}

// Indices that sort `values` descending; ties keep their original order.
template <typename Derived>
std::vector<Index> descending_order(const Eigen::DenseBase<Derived>& values)
{
    std::vector<Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return values(a) > values(b); });
    return order;
}

}  // namespace spca

#endif
