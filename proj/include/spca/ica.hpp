#ifndef SPCA_ICA_HPP
#define SPCA_ICA_HPP

#include "spca/linalg.hpp"
#include "spca/methods.hpp"
#include "spca/nonlinearity.hpp"
#include "spca/sigma_pca.hpp"

namespace spca {

struct Whitening {
    Mat Z;     // n x k, unit covariance
    Mat A;     // p x k, A = W Σ⁻¹
    Vec mean;  // p
    PcaBasis<double> basis;
};

// Throws when a retained component has (near) zero variance.
Whitening whiten_pca(const Mat& X, Index k);

enum class FastIcaContrast { logcosh, cube };

struct FastIcaOptions {
    FastIcaContrast contrast = FastIcaContrast::logcosh;
    double tol = 1e-6;
    int max_iter = 500;
    std::uint64_t seed = 0;
};

struct FastIcaResult {
    Mat V;  // k x k orthogonal
    bool converged = false;
    int iterations = 0;
};

// Symmetric fixed point V <- E[zᵀg(zV)] - V diag(E g'(zV)) followed by
// iterative symmetric decorrelation. Converged once
// 1 - min |diag(V_oldᵀ V_new)| < tol.
FastIcaResult fastica(const Mat& Z, const FastIcaOptions& options = {});

struct IcaResult {
    Mat B;       // p x k overall unmixing, y = (x - mean) B
    Mat W;       // p x k whitening axes
    Vec sigma;   // k whitening standard deviations
    Mat V;       // k x k rotation
    Vec mean;    // p
    std::vector<Index> order;  // component order of B_unit, by descending sigma_est
    Mat B_unit;  // columns of B scaled to unit norm, reordered
    Vec sigma_est;  // 1 / ||b_i|| in the same order
    bool converged = false;
    int iterations = 0;
};

struct UnmixingOrder {
    Mat B_unit;
    std::vector<Index> order;
    Vec sigma_est;
};

// sigma_est_i = 1 / ||b_i||; columns normalised and sorted by descending sigma_est.
UnmixingOrder order_by_unmixing_norm(const Mat& B);

enum class RotationMethod { fastica, conventional_nlpca };

struct NlpcaRotationOptions {
    NonlinearitySpec nonlinearity = NonlinearitySpec::scaled_tanh(1.0);
    double lr = 0.01;
    double momentum = 0.9;
    int batch_size = 100;
    int epochs = 100;
};

struct TwoStageOptions {
    RotationMethod rotation = RotationMethod::fastica;
    FastIcaOptions fastica;
    NlpcaRotationOptions nlpca;
    std::uint64_t seed = 0;
};

IcaResult two_stage_ica(const Mat& X, Index k, const TwoStageOptions& options = {});

// Two layers: σ-PCA W with Σ, then an orthogonal rotation V of the
// standardised components u = x[WΣ⁻¹]_sg trained with the conventional
// nonlinear PCA loss 1/2 E||u - h(uV)Vᵀ||².
struct TwoLayerState {
    SigmaPcaModel first;  // W, Σ handling and nonlinearity of the first layer
    Mat V;                // k x k
    NonlinearitySpec second = NonlinearitySpec::scaled_tanh(1.0);
};

struct TwoLayerGrad {
    GradResult first;   // σ-PCA term, gradient for W
    GradResult second;  // rotation term, gradient for V
};

TwoLayerGrad two_layer_nlpca_grad(const TwoLayerState& state, const Mat& X, Rng* rng = nullptr);

// Standardised first-layer outputs u = (x - μ) W Σ⁻¹ with batch-estimated Σ.
Mat two_layer_inputs(const SigmaPcaModel& first, const Mat& X);

struct TwoLayerOptions {
    SigmaPcaModel first;  // W may be empty (seeded random start)
    TrainConfig first_config = default_signal_config(200);
    NonlinearitySpec second = NonlinearitySpec::scaled_tanh(1.0);
    TrainConfig second_config = default_rotation_config(100);
};

// Trains the first layer, then V on the frozen standardised outputs. The
// first-layer gradient does not depend on V, so the two phases give the same
// fixed points as joint training.
IcaResult two_layer_fit(const Mat& X, Index k, const TwoLayerOptions& options);

// W' = W - eta W (E[yᵀy] - I + E[yᵀh(y)] - E[h(y)ᵀy]); W is k x k and y = xW.
Mat easi_step(const Mat& W, const Mat& y, const NonlinearitySpec& h, double eta);

struct EasiOptions {
    NonlinearitySpec h = NonlinearitySpec::scaled_tanh(1.0);
    double eta = 0.01;
    int batch_size = 100;
    int epochs = 50;
    std::uint64_t seed = 0;
};

// EASI on PCA-reduced data (k x k separating matrix after projection on the
// top-k axes). Returns B = W_pca V.
IcaResult easi_fit(const Mat& X, Index k, const EasiOptions& options = {});

}  // namespace spca

#endif
