#ifndef SPCA_TESTS_SUPPORT_HPP
#define SPCA_TESTS_SUPPORT_HPP

#include "spca/core.hpp"

#include <functional>

namespace spca::test {

inline Mat random_matrix(Index rows, Index cols, std::uint64_t seed, double scale = 1.0)
{
    Rng rng(seed);
    return scale * randn<double>(rows, cols, rng);
}

// Central differences written out here so the library's grad_check is not
// its own oracle.
inline Mat numeric_grad(const std::function<double(const Mat&)>& f, const Mat& W, double h = 1e-6)
{
    Mat g(W.rows(), W.cols());
    for (Index j = 0; j < W.cols(); ++j) {
        for (Index i = 0; i < W.rows(); ++i) {
            Mat Wp = W, Wm = W;
            Wp(i, j) += h;
            Wm(i, j) -= h;
            g(i, j) = (f(Wp) - f(Wm)) / (2 * h);
        }
    }
    return g;
}

// max |a - b| / max(max |a|, max |b|)
inline double rel_error(const Mat& a, const Mat& b)
{
    const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
    return scale == 0.0 ? 0.0 : (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace spca::test

#endif
