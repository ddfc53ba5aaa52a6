#ifndef SPCA_LINEAR_PCA_HPP
#define SPCA_LINEAR_PCA_HPP

#include "spca/gradient.hpp"

namespace spca {

// All rules take a batch X (b x p, one sample per row) and W (p x k) and
// return batch means. Triangular terms are oriented so that column 1 leads:
// column j is only deflated by columns i <= j.

// Diagonal weights 1 >= l_1 > ... > l_k > 0.
struct WeightingSpec {
    Vec lambdas;

    // l_i = (k - i + 1) / k
    static WeightingSpec linear_spaced(Index k);
    void validate() const;
};

enum class LinearVariant { tied_full, subspace, encoder_only };

GradResult linear_pca_grad(const Mat& X, const Mat& W, LinearVariant variant);

enum class WeightedVariant { v1, v2, v3 };

// v1: xᵀy − W yᵀy Λ⁻¹   v2: xᵀyΛ − W yᵀy   v3: xᵀy − W Λ^½ yᵀy Λ^-½
GradResult weighted_subspace_grad(const Mat& X, const Mat& W, const WeightingSpec& lambdas,
                                  WeightedVariant variant);

// Reconstruction + weighted regularisation + weighted variance terms; sigma_hat
// is the frozen per-component standard deviation of the batch.
GradResult asymmetric_pca_loss_grad(const Mat& X, const Mat& W, const WeightingSpec& lambdas,
                                    const Vec& sigma_hat);

enum class GhaVariant { plain, with_encoder, plus_subspace, recon_combo };

GradResult gha_grad(const Mat& X, const Mat& W, GhaVariant variant);

// Truncated geometric p(j) ∝ rho^(j-1) (1 - rho) over j = 1..k.
Vec nested_cut_probabilities(Index k, double rho);
int sample_nested_cut(Index k, double rho, Rng& rng);

// Keeps components 1..cut; cut = k is the tied autoencoder.
GradResult nested_dropout_grad(const Mat& X, const Mat& W, int cut);
GradResult nested_dropout(const Mat& X, const Mat& W, double rho, Rng& rng);

enum class VarianceWeighting { fixed, stochastic, variance_proportional };

// Gradient of 1/2 E(||x - xWWᵀ||² - alpha ||xW Λ^½||²). The stochastic mode
// replaces Λ by a per-sample nested mask drawn with `rho`; the
// variance-proportional mode uses the frozen Λ = E(y²) / max E(y²).
GradResult weighted_variance_grad(const Mat& X, const Mat& W, const WeightingSpec& lambdas,
                                  double alpha, VarianceWeighting mode, double rho = 0.9,
                                  Rng* rng = nullptr);

// 1/2 mean ||x - xWWᵀ||²
double tied_loss(const Mat& X, const Mat& W);

}  // namespace spca

#endif
