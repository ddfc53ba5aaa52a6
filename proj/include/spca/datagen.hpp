#ifndef SPCA_DATAGEN_HPP
#define SPCA_DATAGEN_HPP

#include "spca/linalg.hpp"

namespace spca {

enum class SignalKind { sine, square, sawtooth };

struct SignalSpec {
    SignalKind kind = SignalKind::sine;
    double period = 1.0;
    double target_std = 1.0;
    double noise_std = -1.0;  // negative: 0.05 * target_std
};

// t_i = duration * i / (n - 1)
Vec signal_time_grid(Index n, double duration = 8.0);

// One centred column per spec: shape, additive Gaussian noise, then centre and
// rescale to the exact target std.
Mat gen_signals(Index n, const std::vector<SignalSpec>& specs, std::uint64_t seed, double duration = 8.0);

enum class MixingKind { orthogonal, non_orthogonal };

struct MixingOptions {
    MixingKind kind = MixingKind::orthogonal;
    double cond_max = 10.0;
    double cond_min = 2.0;  // non-orthogonal draws below this are redrawn too
    int max_draws = 10000;
};

// X = S0 B0_inv with B0_inv = V0ᵀ diag(Sigma0) E0ᵀ.
struct GroundTruthMixing {
    Mat S0;      // n x k
    Mat B0_inv;  // k x p
    Mat E0;      // p x k, orthonormal columns
    Vec Sigma0;  // k
    Mat V0;      // k x k orthogonal
    MixingKind kind = MixingKind::orthogonal;
    Vec source_std;  // k, sample stds of S0 (empty until sources are attached)

    // A p x k unmixing with S0 = X B0 (pseudo-inverse of B0_inv).
    Mat unmixing() const;
};

GroundTruthMixing gen_mixing(Index k, Index p, const MixingOptions& options, std::uint64_t seed);

// Attaches sources and returns X = S0 B0_inv.
Mat mix(GroundTruthMixing& truth, const Mat& S0);

enum class SignalScenario { orthogonal_equal, orthogonal_distinct, non_orthogonal };

struct SignalExperiment {
    Vec t;
    Mat X;
    GroundTruthMixing truth;
};

// Sine, square and sawtooth sources mixed into 3 observations.
//   orthogonal_equal:    stds (2, 1, 1), square and sawtooth share a variance
//   orthogonal_distinct: stds (3, 2, 1)
//   non_orthogonal:      stds (2, 1, 1), condition number in [2, 10]
SignalExperiment signal_experiment(SignalScenario scenario, std::uint64_t seed, Index n = 2000,
                                   double noise_fraction = 0.05);

// X = N diag(stds) Rᵀ with N iid standard normal (n x p, drawn from `seed`) and
// R a random orthogonal p x p matrix drawn from `rotation_seed`. The principal
// axes of X are the columns of R, in the order of `stds`.
struct RotatedGaussian {
    Mat X;
    Mat R;
};

RotatedGaussian gen_rotated_gaussian(const Vec& stds, Index n, std::uint64_t seed, std::uint64_t rotation_seed);

enum class PointDist { uniform, laplace, gaussian };

// Zero-mean unit-variance iid axes scaled by `stds`, rotated so that source i
// lies along (cos(theta + (i-1)π/2), sin(theta + (i-1)π/2)).
std::pair<Mat, GroundTruthMixing> gen_points_2d(PointDist dist, Index n, double theta, std::uint64_t seed,
                                                const Vec& stds = Vec::Ones(2));

// Images are stored row-major with interleaved channels: (y * w + x) * c + ch.
struct Image {
    Index height = 0;
    Index width = 0;
    Index channels = 1;
    std::vector<double> pixels;

    double at(Index y, Index x, Index ch) const { return pixels[std::size_t((y * width + x) * channels + ch)]; }
};

// Raster-order patches, channels interleaved the same way as the images.
// zero_pad adds size/2 zero pixels on each side.
DataMatrix<double> extract_patches(const std::vector<Image>& images, Index size, Index stride, bool zero_pad);

Index patch_count(const Image& image, Index size, Index stride, bool zero_pad);

// Grayscale images of random oriented bars over faint noise, values in [0, 1].
std::vector<Image> gen_bars_corpus(Index count, Index height, Index width, std::uint64_t seed);

}  // namespace spca

#endif
