#ifndef SPCA_SIGMA_PCA_HPP
#define SPCA_SIGMA_PCA_HPP

#include "spca/gradient.hpp"
#include "spca/linalg.hpp"
#include "spca/linear_pca.hpp"
#include "spca/nonlinearity.hpp"

#include <optional>

namespace spca {

// Reconstruction x̂ = h(y Σ⁻¹) Σ Wᵀ with y = (x - μ)W.

enum class SigmaMode { batch, ema, trainable };
enum class MuMode { precentred, batch, ema };

enum class DecoderMode {
    stopgrad,        // decoder weights frozen; encoder contribution only
    full,            // encoder + decoder contributions
    rescaled,        // decoder contribution divided by ||Σ||
    sigma_dropped,   // decoder contribution without Σ (update rule, no loss)
    encoder_scaled,  // encoder contribution scaled by Σ (update rule, no loss)
    conventional,    // Σ = I and full gradient of ||x - h(xW)Wᵀ||²
};

enum class SigmaNorm { spectral, frobenius, nuclear };

enum class Ordering { none, projective_deflation, triangular, weighted_latent, nested };

struct SigmaPcaModel {
    Mat W;  // p x k
    NonlinearitySpec nonlinearity;

    SigmaMode sigma_mode = SigmaMode::batch;
    Vec sigma;  // trainable values, or the latest estimate
    double sigma_l2 = 1e-3;
    MomentState<double> sigma_state;  // over y, ema mode

    MuMode mu_mode = MuMode::precentred;
    MomentState<double> mu_state;  // over x, ema mode

    DecoderMode decoder_mode = DecoderMode::stopgrad;
    SigmaNorm rescale_norm = SigmaNorm::spectral;

    Ordering ordering = Ordering::none;
    int triangular_variant = 1;  // 1..6, see ordering_term_grad
    WeightingSpec ordering_weights;
    double nested_rho = 0.9;
    double nested_orth = 1.0;  // strength of 1/2 ||I - WᵀW||² paired with nested ordering

    // Experimental: adds compensation/2 E||x - xW[Wᵀ]_sg||², an implicit
    // orthogonality term for identity-derivative nonlinearities.
    double compensation = 0.0;

    Index p() const { return W.rows(); }
    Index k() const { return W.cols(); }
    void validate() const;
};

struct ForwardCache {
    Mat xc;     // x - μ
    Vec mu;     // p
    Vec sigma;  // k, floored
    Mat y_pre;  // (x - μ)W
    Mat P;      // k x k deflation projector, identity unless projective_deflation
    Mat y;      // y_pre P
    Mat z;      // y Σ⁻¹
    Mat hz;     // h(z)
    Mat dh;     // h'(z) per derivative mode
    Mat xhat;   // h(z) Σ Wᵀ + μ
    Mat yhat;   // (x̂ - μ) W
    bool sigma_floored = false;
};

// Folds the batch into the EMA states used by the ema modes.
void update_statistics(SigmaPcaModel& model, const Mat& X);

ForwardCache sigma_pca_forward(const SigmaPcaModel& model, const Mat& X);

// The rng is consulted only by the nested ordering.
GradResult sigma_pca_grad(const SigmaPcaModel& model, const Mat& X, Rng* rng = nullptr);

// Batch mean of (ŷ - y) ⊙ (h(z) - z h'(z)) plus 2 l2 σ.
Vec trainable_sigma_grad(const ForwardCache& cache, const Vec& sigma, double l2);

// Ordering addition to the ordering-free gradient. Triangular variants add
// W strict_upper(M)/b with M one of
//   1: (h(z)Σ)ᵀh(z)  2: h(z)ᵀh(z)Σ  3: h(z)ᵀy  4: yᵀh(z)  5: zᵀy  6: yᵀz.
// Nested ordering needs the sampled cut and returns the whole masked-loss gradient.
Mat ordering_term_grad(const SigmaPcaModel& model, const ForwardCache& cache, int cut = 0);

enum class LatentVariant { wtw_symreg, tri_wtw_symreg, plain_orthreg, plus_linear };

// E||x[W]_sg - h(xWΣ⁻¹)Σ K||² + orthogonality term, unhalved so that beta keeps
// its usual scale. K = [WᵀW]_sg, lower([WᵀW]_sg) or I; plus_linear uses K = I
// and E||xW[Wᵀ]_sg - x||² in place of beta ||I - WᵀW||².
GradResult latent_recon_grad(const SigmaPcaModel& model, const Mat& X, LatentVariant variant,
                             double beta = 1.0);

enum class RicaPenalty { l1, logcosh };

struct RicaSpec {
    RicaPenalty penalty = RicaPenalty::l1;
    double beta = 0.5;     // beta0 when adaptive, beta itself otherwise
    bool adaptive = true;  // beta = beta0 E||x||
};

// 1/2 E||x - x[W]_sg Wᵀ||² + beta E sum_j g(y_j), g = |.| or log cosh.
GradResult rica_grad(const Mat& X, const Mat& W, const RicaSpec& spec);

enum class SkewBeta { constant, input_norm, sigma_comp };
enum class SkewForm { dediag, skew };

// Subspace rule plus beta W M with M = yᵀh(y) - diag(h(y) ⊙ y) (dediag) or
// yᵀh(y) - h(y)ᵀy (skew). sigma_comp uses h(yΣ⁻¹) and post-multiplies by Σ.
GradResult skew_symmetric_grad(const Mat& X, const Mat& W, const NonlinearitySpec& h, SkewBeta beta_mode,
                               SkewForm form, double beta = 1.0);

enum class NoncentredVariant { wrap, bound };

// Works on uncentred X with frozen batch means of x and y.
GradResult noncentred_grad(const SigmaPcaModel& model, const Mat& X, NoncentredVariant variant);

// Permutes W, sigma and the EMA states so sigma is descending (stable).
std::pair<SigmaPcaModel, std::vector<Index>> sort_components(const SigmaPcaModel& model);

// Standard deviations of y over the full data under the model's mean mode.
Vec estimate_sigma(const SigmaPcaModel& model, const Mat& X);

// Plain mean ||x - x̂||² without updating any statistics.
double sigma_pca_recon_error(const SigmaPcaModel& model, const Mat& X);

}  // namespace spca

#endif
