#include "spca/datagen.hpp"
#include "spca/metrics.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

namespace spca {
namespace {

double sample_std(const Vec& v)
{
    return std::sqrt((v.array() - v.mean()).square().mean());
}

// Amari index written out from its definition, independent of the library.
double amari_reference(const Mat& P)
{
    const Mat A = P.cwiseAbs();
    const Index k = A.rows();
    double s = 0.0;
    for (Index i = 0; i < k; ++i)
        s += A.row(i).sum() / A.row(i).maxCoeff() - 1.0;
    for (Index j = 0; j < k; ++j)
        s += A.col(j).sum() / A.col(j).maxCoeff() - 1.0;
    return s / (2.0 * k * (k - 1));
}

TEST(Signals, NoiselessSineIsExactlyStandardised)
{
    const Mat S = gen_signals(1000, {{SignalKind::sine, 2.0, 1.0, 0.0}}, 1);
    EXPECT_NEAR(sample_std(S.col(0)), 1.0, 1e-6);
    EXPECT_LE(std::abs(S.col(0).mean()), 1e-12);
}

TEST(Signals, EqualTargetsGiveEqualVariances)
{
    const Mat S = gen_signals(2000, {{SignalKind::square, 2.0, 1.5}, {SignalKind::sawtooth, 1.0, 1.5}}, 2);
    const double a = sample_std(S.col(0));
    const double b = sample_std(S.col(1));
    EXPECT_NEAR(a, 1.5, 0.015);
    EXPECT_NEAR(a * a / (b * b), 1.0, 0.01);
}

TEST(Signals, SameSeedIsBitIdentical)
{
    const std::vector<SignalSpec> specs = {{SignalKind::sine, 3.0, 2.0}, {SignalKind::sawtooth, 1.0, 1.0}};
    EXPECT_TRUE(gen_signals(500, specs, 9) == gen_signals(500, specs, 9));
    EXPECT_FALSE(gen_signals(500, specs, 9) == gen_signals(500, specs, 10));
}

TEST(Signals, ShapesFollowTheirDefinitions)
{
    const Vec t = signal_time_grid(801, 8.0);
    EXPECT_DOUBLE_EQ(t(0), 0.0);
    EXPECT_DOUBLE_EQ(t(800), 8.0);
    const Mat S = gen_signals(801, {{SignalKind::square, 2.0, 1.0, 0.0}}, 3);
    // Noiseless square wave takes exactly two values.
    std::vector<double> v(S.data(), S.data() + S.size());
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }), v.end());
    EXPECT_LE(v.size(), 3u);  // sign(sin) is also 0 at the sampled zero crossings
}

TEST(Mixing, OrthogonalRowsAreOrthonormal)
{
    const GroundTruthMixing g = gen_mixing(3, 5, {}, 4);
    EXPECT_LE((g.B0_inv * g.B0_inv.transpose() - Mat::Identity(3, 3)).norm(), 1e-10);
}

TEST(Mixing, NonOrthogonalRespectsTheConditionBoundAndFactorisation)
{
    MixingOptions o;
    o.kind = MixingKind::non_orthogonal;
    o.cond_max = 10.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const GroundTruthMixing g = gen_mixing(3, 3, o, s);
        Eigen::JacobiSVD<Mat> svd(g.B0_inv);
        const Vec sv = svd.singularValues();
        EXPECT_LE(sv(0) / sv(2), 10.0 + 1e-9);
        EXPECT_LE((g.V0.transpose() * g.Sigma0.asDiagonal() * g.E0.transpose() - g.B0_inv).norm(), 1e-10);
        EXPECT_LE((g.B0_inv * g.unmixing() - Mat::Identity(3, 3)).norm(), 1e-10);
    }
}

TEST(Points2d, ZeroAngleLeavesTheSources)
{
    auto [X, g] = gen_points_2d(PointDist::uniform, 100, 0.0, 5);
    EXPECT_LE((X - g.S0).norm(), 1e-12);
}

TEST(Points2d, EqualVarianceRotationStaysIsotropic)
{
    auto [X, g] = gen_points_2d(PointDist::uniform, 20000, std::numbers::pi / 4, 6);
    const Mat C = centred(X).transpose() * centred(X) / double(X.rows());
    EXPECT_LE((C - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Points2d, LaplaceExcessKurtosis)
{
    auto [X, g] = gen_points_2d(PointDist::laplace, 100000, 0.0, 7);
    for (Index j = 0; j < 2; ++j) {
        const Vec c = X.col(j).array() - X.col(j).mean();
        const double m2 = c.array().square().mean();
        const double m4 = c.array().pow(4).mean();
        EXPECT_NEAR(m4 / (m2 * m2) - 3.0, 3.0, 0.3) << j;
    }
}

Image ramp(Index h, Index w)
{
    Image im;
    im.height = h;
    im.width = w;
    for (Index i = 0; i < h * w; ++i)
        im.pixels.push_back(double(i + 1));
    return im;
}

TEST(Patches, StridedCount)
{
    const DataMatrix<double> P = extract_patches({ramp(4, 4)}, 2, 2, false);
    EXPECT_EQ(P.values().rows(), 4);
    EXPECT_EQ(P.values().cols(), 4);
    // Second patch in raster order starts at column 2 of row 0.
    EXPECT_EQ(P.values()(1, 0), 3.0);
    EXPECT_EQ(P.values()(1, 3), 8.0);
}

TEST(Patches, ZeroPaddedCorner)
{
    const DataMatrix<double> P = extract_patches({ramp(3, 3)}, 3, 1, true);
    EXPECT_EQ(P.values().rows(), 9);
    // A 3x3 window centred on the corner pixel covers one padded row and one
    // padded column, which overlap in one cell: 3 + 3 - 1 = 5 zeros.
    EXPECT_EQ((P.values().row(0).array() == 0.0).count(), 5);
    EXPECT_EQ((P.values().row(4).array() == 0.0).count(), 0);
}

TEST(Patches, DimensionFollowsSizeAndChannels)
{
    std::vector<Image> corpus = gen_bars_corpus(2, 32, 32, 8);
    EXPECT_EQ(extract_patches(corpus, 11, 4, false).values().cols(), 121);
    Image rgb = ramp(12, 12);
    rgb.channels = 3;
    rgb.pixels.resize(12 * 12 * 3, 0.5);
    const DataMatrix<double> P = extract_patches({rgb}, 11, 4, false);
    EXPECT_EQ(P.values().cols(), 121 * 3);
    EXPECT_EQ(P.values().rows(), patch_count(rgb, 11, 4, false));
    EXPECT_THROW(extract_patches({rgb}, 0, 1, false), std::invalid_argument);
}

TEST(Match, IdentityAndSwappedNegation)
{
    const Mat S = test::random_matrix(200, 3, 9);
    const MatchReport id = match_components(S, S);
    EXPECT_EQ(id.perm, (std::vector<Index>{0, 1, 2}));
    EXPECT_EQ(id.signs, (std::vector<int>{1, 1, 1}));
    EXPECT_NEAR(id.min_corr(), 1.0, 1e-12);

    const Mat S2 = S.leftCols(2);
    Mat Y(200, 2);
    Y << -S2.col(1), -S2.col(0);
    const MatchReport sw = match_components(Y, S2);
    EXPECT_EQ(sw.perm, (std::vector<Index>{1, 0}));
    EXPECT_EQ(sw.signs, (std::vector<int>{-1, -1}));
    EXPECT_NEAR(sw.min_corr(), 1.0, 1e-12);
}

TEST(Match, ConstantColumnHasZeroCorrelation)
{
    Mat Y = test::random_matrix(50, 2, 10);
    Y.col(1).setConstant(3.0);
    const Mat C = correlation_matrix(Y, test::random_matrix(50, 2, 11));
    EXPECT_EQ(C(1, 0), 0.0);
    EXPECT_EQ(C(1, 1), 0.0);
}

TEST(Match, GreedyNeverBeatsBruteForceAndUsuallyTies)
{
    // Noisy recoveries of k = 4 sources, as a separation run produces them.
    int ties = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const Mat S = test::random_matrix(200, 4, 1000 + s);
        Rng rng(2000 + s);
        std::vector<Index> q = {0, 1, 2, 3};
        std::shuffle(q.begin(), q.end(), rng);
        Mat Y = 0.5 * test::random_matrix(200, 4, 3000 + s);
        for (Index j = 0; j < 4; ++j)
            Y.col(j) += (rng() % 2 ? 1.0 : -1.0) * S.col(q[std::size_t(j)]);
        const Mat C = correlation_matrix(Y, S);
        const double brute = match_similarity(C, MatchMethod::brute_force).total();
        const double greedy = match_similarity(C, MatchMethod::greedy).total();
        EXPECT_LE(greedy, brute + 1e-12);
        ties += std::abs(greedy - brute) <= 1e-12;
    }
    EXPECT_GE(ties, 90);
}

TEST(Match, InvariantToSignFlipsAndPermutations)
{
    const Mat S = test::random_matrix(300, 4, 12);
    const Mat Y = S + 0.5 * test::random_matrix(300, 4, 13);
    const MatchReport base = match_components(Y, S);
    Mat Yp(300, 4);
    const std::vector<Index> q = {2, 0, 3, 1};
    for (Index j = 0; j < 4; ++j)
        Yp.col(j) = (j % 2 ? -1.0 : 1.0) * Y.col(q[std::size_t(j)]);
    const MatchReport r = match_components(Yp, S);
    EXPECT_NEAR(r.total(), base.total(), 1e-12);
    for (Index j = 0; j < 4; ++j) {
        const Index orig = q[std::size_t(j)];
        EXPECT_EQ(r.perm[std::size_t(j)], base.perm[std::size_t(orig)]);
        EXPECT_EQ(r.signs[std::size_t(j)], (j % 2 ? -1 : 1) * base.signs[std::size_t(orig)]);
    }
}

TEST(Amari, ZeroForScaledSignedPermutations)
{
    EXPECT_NEAR(amari_index(Mat(Mat::Identity(3, 3))), 0.0, 1e-15);
    Mat P = Mat::Zero(3, 3);
    P(0, 2) = -2.0;
    P(1, 0) = 0.5;
    P(2, 1) = 3.0;
    EXPECT_NEAR(amari_index(P), 0.0, 1e-15);
    const Mat B0inv = test::random_matrix(3, 3, 14);
    const Mat B = B0inv.inverse() * P;
    EXPECT_NEAR(amari_index(B, B0inv), 0.0, 1e-12);
}

TEST(Amari, MatchesTheDefinitionAndIsInvariantToSignedPermutations)
{
    Mat Q = Mat::Zero(4, 4);
    Q(0, 3) = 1;
    Q(1, 0) = -1;
    Q(2, 1) = 1;
    Q(3, 2) = -1;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Mat P = test::random_matrix(4, 4, 20 + s);
        EXPECT_NEAR(amari_index(P), amari_reference(P), 1e-12);
        EXPECT_GT(amari_index(P), 0.1);
        EXPECT_NEAR(amari_index(Mat(Q * P)), amari_index(P), 1e-12);
        EXPECT_NEAR(amari_index(Mat(P * Q)), amari_index(P), 1e-12);
    }
}

TEST(Amari, ScalingIsOnlyInvisibleAtZero)
{
    // Row scaling leaves the row terms alone but reweights the column terms,
    // so the index is scale-invariant only at a scaled permutation.
    const Mat P = test::random_matrix(3, 3, 40);
    const Mat D = Vec(Eigen::Vector3d(1, 10, 0.1)).asDiagonal();
    EXPECT_GT(std::abs(amari_index(Mat(D * P)) - amari_index(P)), 1e-3);
    EXPECT_NEAR(amari_index(Mat(D * Mat::Identity(3, 3))), 0.0, 1e-15);
}

TEST(Metrics, VarianceSigmaAndAngleErrors)
{
    const Mat S = test::random_matrix(1000, 2, 30);
    Mat Y(1000, 2);
    Y << 1.1 * S.col(1), -S.col(0);
    const MatchReport m = match_components(Y, S);
    const Vec ve = variance_errors(Y, S, m);
    EXPECT_NEAR(ve(0), 0.1, 1e-12);
    EXPECT_NEAR(ve(1), 0.0, 1e-12);
    const Vec se = sigma_errors(Vec(Eigen::Vector2d(2.2, 1.0)), Vec(Eigen::Vector2d(1.0, 2.0)), m);
    EXPECT_NEAR(se(0), 0.1, 1e-12);
    EXPECT_NEAR(se(1), 0.0, 1e-12);

    const double t = 0.3;
    Mat W(2, 2);
    W << std::cos(t + 0.01), -std::sin(t), std::sin(t + 0.01), std::cos(t);
    EXPECT_NEAR(angle_error(W, t), 0.01, 1e-12);
    EXPECT_NEAR(angle_error(W, t + std::numbers::pi / 2), 0.01, 1e-12);
}

}  // namespace
}  // namespace spca
