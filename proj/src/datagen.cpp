#include "spca/datagen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace spca {

Vec signal_time_grid(Index n, double duration)
{
    require(n >= 2, "signal_time_grid: need n >= 2");
    Vec t(n);
    for (Index i = 0; i < n; ++i)
        t(i) = duration * double(i) / double(n - 1);
    return t;
}

namespace {

double shape(SignalKind kind, double t, double period)
{
    const double phase = t / period;
    switch (kind) {
    case SignalKind::sine:
        return std::sin(2.0 * std::numbers::pi * phase);
    case SignalKind::square: {
        const double s = std::sin(2.0 * std::numbers::pi * phase);
        return s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
    }
    case SignalKind::sawtooth:
        return 2.0 * (phase - std::floor(phase)) - 1.0;
    }
    return 0.0;
}

}  // namespace

Mat gen_signals(Index n, const std::vector<SignalSpec>& specs, std::uint64_t seed, double duration)
{
    require(n >= 2, "gen_signals: need n >= 2");
    require(!specs.empty(), "gen_signals: no signal specs");
    const Vec t = signal_time_grid(n, duration);
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat S(n, Index(specs.size()));
    for (std::size_t j = 0; j < specs.size(); ++j) {
        const SignalSpec& s = specs[j];
        require(s.period > 0.0, "gen_signals: period must be > 0");
        require(s.target_std > 0.0, "gen_signals: target_std must be > 0");
        const double noise = s.noise_std < 0.0 ? 0.05 * s.target_std : s.noise_std;
        auto col = S.col(Index(j));
        for (Index i = 0; i < n; ++i)
            col(i) = s.target_std * shape(s.kind, t(i), s.period) + noise * normal(rng);
        col.array() -= col.mean();
        const double sd = std::sqrt(col.squaredNorm() / double(n));
        require(sd > 0.0, "gen_signals: constant signal");
        col *= s.target_std / sd;
    }
    return S;
}

Mat GroundTruthMixing::unmixing() const
{
    // B0_inv = V0ᵀ Σ0 E0ᵀ has right inverse E0 Σ0⁻¹ V0.
    return E0 * Sigma0.cwiseInverse().asDiagonal() * V0;
}

GroundTruthMixing gen_mixing(Index k, Index p, const MixingOptions& options, std::uint64_t seed)
{
    require(k >= 1 && k <= p, "gen_mixing: need 1 <= k <= p");
    Rng rng(seed);
    GroundTruthMixing g;
    g.kind = options.kind;
    if (options.kind == MixingKind::orthogonal) {
        g.E0 = random_semi_orthogonal<double>(p, k, rng);
        g.B0_inv = g.E0.transpose();
        g.Sigma0 = Vec::Ones(k);
        g.V0 = Mat::Identity(k, k);
        return g;
    }
    require(options.cond_max >= 1.0 && options.cond_min <= options.cond_max,
            "gen_mixing: need 1 <= cond_min <= cond_max");
    for (int draw = 0; draw < options.max_draws; ++draw) {
        const Mat B = randn<double>(k, p, rng);
        Eigen::JacobiSVD<Mat> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vec S = svd.singularValues();
        const double cond = S(0) / S(k - 1);
        if (!(cond <= options.cond_max) || (k > 1 && cond < options.cond_min))
            continue;
        Mat U = svd.matrixU();  // k x k
        Mat V = svd.matrixV();  // p x k
        // Fix signs so each E0 column has a positive largest-magnitude entry.
        for (Index j = 0; j < k; ++j) {
            Index r = 0;
            V.col(j).cwiseAbs().maxCoeff(&r);
            if (V(r, j) < 0.0) {
                V.col(j) *= -1.0;
                U.col(j) *= -1.0;
            }
        }
        g.B0_inv = B;
        g.E0 = V;
        g.Sigma0 = S;
        g.V0 = U.transpose();
        return g;
    }
    throw std::runtime_error("gen_mixing: no draw met the condition bounds");
}

Mat mix(GroundTruthMixing& truth, const Mat& S0)
{
    require(S0.cols() == truth.B0_inv.rows(), "mix: source count does not match the mixing");
    truth.S0 = S0;
    truth.source_std = batch_moments(S0).var.cwiseSqrt();
    return S0 * truth.B0_inv;
}

SignalExperiment signal_experiment(SignalScenario scenario, std::uint64_t seed, Index n, double noise_fraction)
{
    std::vector<double> stds = {2.0, 1.0, 1.0};
    if (scenario == SignalScenario::orthogonal_distinct)
        stds = {3.0, 2.0, 1.0};
    const std::vector<SignalSpec> specs = {
        {SignalKind::sine, std::numbers::pi, stds[0], noise_fraction * stds[0]},
        {SignalKind::square, 2.0 * std::numbers::pi / 3.0, stds[1], noise_fraction * stds[1]},
        {SignalKind::sawtooth, 1.0, stds[2], noise_fraction * stds[2]},
    };
    SignalExperiment e;
    e.t = signal_time_grid(n);
    MixingOptions mo;
    mo.kind = scenario == SignalScenario::non_orthogonal ? MixingKind::non_orthogonal : MixingKind::orthogonal;
    e.truth = gen_mixing(3, 3, mo, seed * 2 + 1);
    e.X = mix(e.truth, gen_signals(n, specs, seed * 2));
    return e;
}

std::pair<Mat, GroundTruthMixing> gen_points_2d(PointDist dist, Index n, double theta, std::uint64_t seed,
                                                const Vec& stds)
{
    require(n >= 2, "gen_points_2d: need n >= 2");
    require(stds.size() == 2 && (stds.array() > 0.0).all(), "gen_points_2d: need two positive stds");
    Rng rng(seed);
    std::uniform_real_distribution<double> uni(-0.5, 0.5);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double laplace_scale = 1.0 / std::sqrt(2.0);
    Mat S(n, 2);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < 2; ++j) {
            double v = 0.0;
            switch (dist) {
            case PointDist::uniform:
                v = 2.0 * std::sqrt(3.0) * uni(rng);
                break;
            case PointDist::laplace: {
                const double u = uni(rng);
                v = -laplace_scale * (u < 0.0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::abs(u));
                break;
            }
            case PointDist::gaussian:
                v = normal(rng);
                break;
            }
            S(i, j) = stds(j) * v;
        }
    }
    GroundTruthMixing g;
    g.kind = MixingKind::orthogonal;
    const double c = std::cos(theta), s = std::sin(theta);
    g.B0_inv.resize(2, 2);
    g.B0_inv << c, s, -s, c;
    g.E0 = g.B0_inv.transpose();
    g.Sigma0 = Vec::Ones(2);
    g.V0 = Mat::Identity(2, 2);
    Mat X = mix(g, S);
    return {X, g};
}

Index patch_count(const Image& image, Index size, Index stride, bool zero_pad)
{
    require(size >= 1, "extract_patches: size must be >= 1");
    require(stride >= 1, "extract_patches: stride must be >= 1");
    const Index pad = zero_pad ? size / 2 : 0;
    const Index H = image.height + 2 * pad, W = image.width + 2 * pad;
    if (size > H || size > W)
        return 0;
    return ((H - size) / stride + 1) * ((W - size) / stride + 1);
}

DataMatrix<double> extract_patches(const std::vector<Image>& images, Index size, Index stride, bool zero_pad)
{
    require(size >= 1, "extract_patches: size must be >= 1");
    require(stride >= 1, "extract_patches: stride must be >= 1");
    require(!images.empty(), "extract_patches: no images");
    const Index c = images.front().channels;
    Index total = 0;
    for (const Image& im : images) {
        require(im.channels == c, "extract_patches: images differ in channel count");
        require(std::size_t(im.height * im.width * im.channels) == im.pixels.size(),
                "extract_patches: image buffer size does not match its shape");
        const Index count = patch_count(im, size, stride, zero_pad);
        require(count > 0, "extract_patches: patch size " + std::to_string(size) + " exceeds image " +
                               std::to_string(im.height) + "x" + std::to_string(im.width));
        total += count;
    }
    const Index pad = zero_pad ? size / 2 : 0;
    Mat out(total, size * size * c);
    Index row = 0;
    for (const Image& im : images) {
        const Index H = im.height + 2 * pad, W = im.width + 2 * pad;
        for (Index y0 = 0; y0 + size <= H; y0 += stride) {
            for (Index x0 = 0; x0 + size <= W; x0 += stride) {
                Index col = 0;
                for (Index dy = 0; dy < size; ++dy) {
                    for (Index dx = 0; dx < size; ++dx) {
                        const Index y = y0 + dy - pad, x = x0 + dx - pad;
                        const bool inside = y >= 0 && y < im.height && x >= 0 && x < im.width;
                        for (Index ch = 0; ch < c; ++ch)
                            out(row, col++) = inside ? im.at(y, x, ch) : 0.0;
                    }
                }
                ++row;
            }
        }
    }
    return DataMatrix<double>(std::move(out));
}

std::vector<Image> gen_bars_corpus(Index count, Index height, Index width, std::uint64_t seed)
{
    require(count >= 1 && height >= 1 && width >= 1, "gen_bars_corpus: empty corpus");
    Rng rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> nbars(1, 3);
    std::vector<Image> out;
    out.reserve(std::size_t(count));
    for (Index n = 0; n < count; ++n) {
        Image im;
        im.height = height;
        im.width = width;
        im.pixels.assign(std::size_t(height * width), 0.0);
        const int bars = nbars(rng);
        std::vector<std::array<double, 4>> lines;
        for (int b = 0; b < bars; ++b) {
            const double angle = std::numbers::pi * uni(rng);
            const double cx = width * uni(rng), cy = height * uni(rng);
            const double half_width = 0.6 + 1.4 * uni(rng);
            lines.push_back({angle, cx, cy, half_width});
        }
        for (Index y = 0; y < height; ++y) {
            for (Index x = 0; x < width; ++x) {
                double v = 0.0;
                for (const auto& l : lines) {
                    // Distance from the pixel centre to the bar's axis.
                    const double d = -(x + 0.5 - l[1]) * std::sin(l[0]) + (y + 0.5 - l[2]) * std::cos(l[0]);
                    v = std::max(v, std::exp(-0.5 * d * d / (l[3] * l[3])));
                }
                v += 0.05 * normal(rng);
                im.pixels[std::size_t(y * width + x)] = std::clamp(v, 0.0, 1.0);
            }
        }
        out.push_back(std::move(im));
    }
    return out;
}

RotatedGaussian gen_rotated_gaussian(const Vec& stds, Index n, std::uint64_t seed, std::uint64_t rotation_seed)
{
    require(stds.size() > 0 && n > 0, "gen_rotated_gaussian: need at least one axis and one sample");
    require((stds.array() >= 0.0).all(), "gen_rotated_gaussian: stds must be non-negative");
    Rng rng(seed);
    RotatedGaussian out;
    out.R = random_semi_orthogonal<double>(stds.size(), stds.size(), rotation_seed);
    out.X = randn<double>(n, stds.size(), rng) * stds.asDiagonal() * out.R.transpose();
    return out;
}

}  // namespace spca
