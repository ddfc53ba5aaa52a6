#ifndef SPCA_METRICS_HPP
#define SPCA_METRICS_HPP

#include "spca/datagen.hpp"

namespace spca {

enum class MatchMethod { automatic, brute_force, greedy };

// Recovered column i corresponds to reference column perm[i] with sign signs[i].
struct MatchReport {
    std::vector<Index> perm;
    std::vector<int> signs;
    Vec corrs;  // |similarity| of each matched pair
    MatchMethod method = MatchMethod::brute_force;

    double min_corr() const { return corrs.size() ? corrs.minCoeff() : 0.0; }
    double total() const { return corrs.sum(); }
};

// Pearson correlations between columns of A and columns of B; constant columns give 0.
Mat correlation_matrix(const Mat& A, const Mat& B);

// Cosines between columns of A and columns of B; zero columns give 0.
Mat cosine_matrix(const Mat& A, const Mat& B);

// Maximises the summed |S_ij| over one-to-one assignments. automatic picks
// brute force for k <= 6 and greedy above; brute force throws for k > 6.
MatchReport match_similarity(const Mat& S, MatchMethod method = MatchMethod::automatic);

MatchReport match_components(const Mat& Y, const Mat& S0, MatchMethod method = MatchMethod::automatic);

// Per-column |cos| after matching W's columns to the reference columns.
MatchReport match_columns(const Mat& W, const Mat& W_ref, MatchMethod method = MatchMethod::automatic);

// Cross-talk of P: zero iff P is a scaled permutation, normalised by 2k(k-1).
double amari_index(const Mat& P);
// Amari index of P = B0_inv B.
double amari_index(const Mat& B, const Mat& B0_inv);

// |std(Y_i) - std(S0_perm(i))| / std(S0_perm(i)) per recovered column.
Vec variance_errors(const Mat& Y, const Mat& S0, const MatchReport& report);

// |sigma_est_i - sigma0_perm(i)| / sigma0_perm(i).
Vec sigma_errors(const Vec& sigma_est, const Vec& sigma0, const MatchReport& report);

// Largest angular distance, modulo π/2, between a column direction of the
// 2 x k matrix W and theta. Radians.
double angle_error(const Mat& W, double theta);

}  // namespace spca

#endif
