#include "spca/metrics.hpp"

#include <cmath>
#include <numbers>

namespace spca {

Mat correlation_matrix(const Mat& A, const Mat& B)
{
    require(A.rows() == B.rows(), "correlation_matrix: row counts differ");
    const Mat Ac = centred(A), Bc = centred(B);
    const Vec na = Ac.colwise().norm().transpose(), nb = Bc.colwise().norm().transpose();
    Mat C = Ac.transpose() * Bc;
    for (Index i = 0; i < C.rows(); ++i)
        for (Index j = 0; j < C.cols(); ++j)
            C(i, j) = (na(i) > 0.0 && nb(j) > 0.0) ? C(i, j) / (na(i) * nb(j)) : 0.0;
    return C;
}

Mat cosine_matrix(const Mat& A, const Mat& B)
{
    require(A.rows() == B.rows(), "cosine_matrix: row counts differ");
    const Vec na = A.colwise().norm().transpose(), nb = B.colwise().norm().transpose();
    Mat C = A.transpose() * B;
    for (Index i = 0; i < C.rows(); ++i)
        for (Index j = 0; j < C.cols(); ++j)
            C(i, j) = (na(i) > 0.0 && nb(j) > 0.0) ? C(i, j) / (na(i) * nb(j)) : 0.0;
    return C;
}

namespace {

MatchReport finish(const Mat& S, std::vector<Index> perm, MatchMethod method)
{
    MatchReport r;
    r.method = method;
    r.corrs.resize(S.rows());
    r.signs.resize(std::size_t(S.rows()));
    for (Index i = 0; i < S.rows(); ++i) {
        const double v = S(i, perm[std::size_t(i)]);
        r.corrs(i) = std::abs(v);
        r.signs[std::size_t(i)] = v < 0.0 ? -1 : 1;
    }
    r.perm = std::move(perm);
    return r;
}

}  // namespace

MatchReport match_similarity(const Mat& S, MatchMethod method)
{
    require(S.rows() == S.cols(), "match_similarity: need a square similarity matrix");
    const Index k = S.rows();
    if (method == MatchMethod::automatic)
        method = k <= 6 ? MatchMethod::brute_force : MatchMethod::greedy;
    const Mat A = S.cwiseAbs();
    if (method == MatchMethod::brute_force) {
        require(k <= 6, "match_similarity: brute force needs k <= 6");
        std::vector<Index> perm(static_cast<std::size_t>(k)), best;
        std::iota(perm.begin(), perm.end(), Index(0));
        double best_total = -1.0;
        do {
            double total = 0.0;
            for (Index i = 0; i < k; ++i)
                total += A(i, perm[std::size_t(i)]);
            if (total > best_total) {
                best_total = total;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return finish(S, best, MatchMethod::brute_force);
    }
    std::vector<Index> perm(std::size_t(k), -1);
    std::vector<bool> row_used(std::size_t(k), false), col_used(std::size_t(k), false);
    for (Index step = 0; step < k; ++step) {
        double best = -1.0;
        Index bi = -1, bj = -1;
        for (Index i = 0; i < k; ++i) {
            if (row_used[std::size_t(i)])
                continue;
            for (Index j = 0; j < k; ++j) {
                if (!col_used[std::size_t(j)] && A(i, j) > best) {
                    best = A(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        perm[std::size_t(bi)] = bj;
        row_used[std::size_t(bi)] = true;
        col_used[std::size_t(bj)] = true;
    }
    return finish(S, perm, MatchMethod::greedy);
}

MatchReport match_components(const Mat& Y, const Mat& S0, MatchMethod method)
{
    require(Y.cols() == S0.cols(), "match_components: Y and S0 need the same number of columns");
    return match_similarity(correlation_matrix(Y, S0), method);
}

MatchReport match_columns(const Mat& W, const Mat& W_ref, MatchMethod method)
{
    require(W.cols() == W_ref.cols(), "match_columns: column counts differ");
    return match_similarity(cosine_matrix(W, W_ref), method);
}

double amari_index(const Mat& P)
{
    require(P.rows() == P.cols() && P.rows() >= 2, "amari_index: need a square matrix with k >= 2");
    const Index k = P.rows();
    const Mat A = P.cwiseAbs();
    double rows = 0.0, cols = 0.0;
    for (Index i = 0; i < k; ++i)
        rows += A.row(i).sum() / A.row(i).maxCoeff() - 1.0;
    for (Index j = 0; j < k; ++j)
        cols += A.col(j).sum() / A.col(j).maxCoeff() - 1.0;
    return (rows + cols) / (2.0 * double(k) * double(k - 1));
}

double amari_index(const Mat& B, const Mat& B0_inv)
{
    require(B0_inv.cols() == B.rows(), "amari_index: B0_inv and B do not compose");
    return amari_index(Mat(B0_inv * B));
}

Vec variance_errors(const Mat& Y, const Mat& S0, const MatchReport& report)
{
    const Vec sy = batch_moments(Y).var.cwiseSqrt();
    const Vec ss = batch_moments(S0).var.cwiseSqrt();
    Vec e(Y.cols());
    for (Index i = 0; i < Y.cols(); ++i) {
        const double ref = ss(report.perm[std::size_t(i)]);
        e(i) = std::abs(sy(i) - ref) / ref;
    }
    return e;
}

Vec sigma_errors(const Vec& sigma_est, const Vec& sigma0, const MatchReport& report)
{
    require(sigma_est.size() == Index(report.perm.size()), "sigma_errors: size mismatch");
    Vec e(sigma_est.size());
    for (Index i = 0; i < sigma_est.size(); ++i) {
        const double ref = sigma0(report.perm[std::size_t(i)]);
        e(i) = std::abs(sigma_est(i) - ref) / ref;
    }
    return e;
}

double angle_error(const Mat& W, double theta)
{
    require(W.rows() == 2, "angle_error: W must have 2 rows");
    const double quarter = std::numbers::pi / 2.0;
    double worst = 0.0;
    for (Index j = 0; j < W.cols(); ++j) {
        const double phi = std::atan2(W(1, j), W(0, j));
        double d = std::fmod(phi - theta, quarter);
        if (d < 0.0)
            d += quarter;
        worst = std::max(worst, std::min(d, quarter - d));
    }
    return worst;
}

}  // namespace spca
