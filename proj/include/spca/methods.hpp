#ifndef SPCA_METHODS_HPP
#define SPCA_METHODS_HPP

#include "spca/linear_pca.hpp"
#include "spca/optim.hpp"
#include "spca/sigma_pca.hpp"

#include <memory>

namespace spca {

// Trainer bindings for the gradient ops. Linear rules expect centred data.

struct LinearRule {
    enum class Family { linear, weighted_subspace, asymmetric_loss, gha, nested_dropout, weighted_variance };
    Family family = Family::linear;
    LinearVariant linear = LinearVariant::tied_full;
    WeightedVariant weighted = WeightedVariant::v1;
    GhaVariant gha = GhaVariant::plain;
    VarianceWeighting weighting = VarianceWeighting::fixed;
    WeightingSpec lambdas;  // empty: linear_spaced(k)
    double alpha = 1.0;
    double rho = 0.9;
};

Method linear_method(const LinearRule& rule);

// Command-line names: tied, subspace, encoder-only, weighted-v1..v3,
// asymmetric, gha, gha-encoder, gha-subspace, gha-recon, nested-dropout,
// wvar-fixed, wvar-stochastic, wvar-proportional.
const std::vector<std::string>& linear_rule_names();
LinearRule linear_rule_from_string(const std::string& name);

// The binding owns the model's running statistics; `state` reflects the
// latest step. Evaluation uses the params with those statistics.
struct SigmaPcaBinding {
    Method method;
    std::shared_ptr<SigmaPcaModel> state;
};

SigmaPcaBinding sigma_pca_method(const SigmaPcaModel& model);

Method latent_recon_method(const SigmaPcaModel& model, LatentVariant variant, double beta);

Method rica_method(const RicaSpec& spec);

// Conventional nonlinear PCA on already standardised inputs:
// 1/2 E||u - h(uV)Vᵀ||², full gradient in V.
GradResult nlpca_rotation_grad(const Mat& U, const Mat& V, const NonlinearitySpec& h);
Method nlpca_rotation_method(const NonlinearitySpec& h);

struct SigmaPcaFit {
    SigmaPcaModel model;  // checkpointed weights, sigma estimated on the full data
    TrainResult train;
};

// Trains from model.W, or from a seeded random semi-orthogonal W when
// model.W is empty (k taken from `k`).
SigmaPcaFit fit_sigma_pca(const Mat& X, Index k, SigmaPcaModel model, const TrainConfig& config);

struct LinearFit {
    Mat W;
    Vec mean;
    TrainResult train;
};

LinearFit fit_linear(const Mat& X, Index k, const LinearRule& rule, const TrainConfig& config);

// Signals / 2-D defaults: SGD lr 0.01, momentum 0.9, batch 100.
TrainConfig default_signal_config(int epochs = 200, std::uint64_t seed = 0);
// Patch defaults: Adam lr 1e-3, batch 128.
TrainConfig default_patch_config(int epochs = 50, std::uint64_t seed = 0);

// Linear rules: SGD lr 1e-3, momentum 0.9, batch 100, no constraint, last
// checkpoint. The rules hold their own norms; lr 0.01 is unstable once the
// leading variance reaches ~16.
TrainConfig default_linear_config(int epochs = 200, std::uint64_t seed = 0);

// Rotation training: SGD lr 0.01, momentum 0.9, batch 100, iterative orthogonalisation.
TrainConfig default_rotation_config(int epochs = 100, std::uint64_t seed = 0);

}  // namespace spca

#endif
