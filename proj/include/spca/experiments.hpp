#ifndef SPCA_EXPERIMENTS_HPP
#define SPCA_EXPERIMENTS_HPP

#include "spca/datagen.hpp"
#include "spca/ica.hpp"
#include "spca/methods.hpp"
#include "spca/metrics.hpp"

#include <optional>

namespace spca {

// End-to-end runs shared by the command-line tool and the acceptance suite.

enum class SeparationMethod { linear_pca, sigma_pca, fastica, two_stage, two_layer, easi };

std::string to_string(SeparationMethod m);
SeparationMethod separation_method_from_string(const std::string& name);
std::string to_string(SignalScenario s);
SignalScenario signal_scenario_from_string(const std::string& name);
std::string to_string(PointDist d);
PointDist point_dist_from_string(const std::string& name);

struct SeparationOptions {
    SeparationMethod method = SeparationMethod::sigma_pca;
    double a = 0.8;  // scale of a tanh(z/a)
    std::uint64_t seed = 0;
    std::optional<TrainConfig> train;  // default_signal_config(epochs) when unset
    int epochs = 200;
};

struct SeparationResult {
    Mat W;      // p x k axes (linear PCA, σ-PCA) or unit-norm unmixing columns (ICA)
    Mat B;      // p x k unmixing, Y = (X - mean) B
    Vec mean;
    Mat Y;      // n x k recovered components
    Vec sigma;  // per-component std of Y
    std::vector<EpochRecord> history;
};

// Fits the requested method on X and returns the recovered components.
// Linear and σ-PCA recover components as (x - μ)W so variances carry over;
// ICA methods return unit-variance components.
SeparationResult separate(const Mat& X, Index k, const SeparationOptions& options);

struct SignalRunOptions {
    SignalScenario scenario = SignalScenario::orthogonal_equal;
    SeparationOptions separation;
    Index n = 2000;
    double noise_fraction = 0.05;
    std::uint64_t data_seed = 0;
};

struct SignalRun {
    SignalExperiment data;
    SeparationResult fit;
    MatchReport match;
    Vec variance_errors;
    double amari = 0.0;
    double orth_residual = 0.0;
    bool success = false;  // min matched |corr| >= 0.9
};

SignalRun run_signals(const SignalRunOptions& options);

struct PointsRunOptions {
    PointDist dist = PointDist::uniform;
    double theta = 0.7853981633974483;
    Index n = 1000;
    SeparationOptions separation;  // epochs default 100
    std::uint64_t data_seed = 0;
};

struct PointsRun {
    Mat X;
    GroundTruthMixing truth;
    SeparationResult fit;
    double angle_error_deg = 0.0;
};

PointsRun run_points2d(const PointsRunOptions& options);

enum class PatchMethod { sigma_pca, sigma_pca_full_decoder, linear_symmetric, conventional, svd, fastica, rica };

std::string to_string(PatchMethod m);
PatchMethod patch_method_from_string(const std::string& name);

struct PatchRunOptions {
    PatchMethod method = PatchMethod::sigma_pca;
    Index images = 40;
    Index image_size = 32;
    Index patch = 8;
    Index stride = 4;
    bool zero_pad = true;
    Index k = 16;
    double a = 4.0;
    int epochs = 30;
    std::uint64_t seed = 0;
    RicaSpec rica;          // rica method only
    std::optional<TrainConfig> train;  // default_patch_config(epochs) when unset
};

struct PatchRun {
    Index patch = 0;
    Index channels = 1;
    Mat W;      // p x k filters, sorted by descending sigma where applicable
    Vec sigma;  // component stds over the patch set
    std::vector<EpochRecord> history;
    Mat data_mean;
};

// Patches are centred before training. Without `images` a bars corpus is
// generated from images/image_size/seed.
PatchRun run_patches(const PatchRunOptions& options, const std::vector<Image>* images = nullptr);

}  // namespace spca

#endif
