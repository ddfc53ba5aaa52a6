#include "spca/datagen.hpp"
#include "spca/linear_pca.hpp"
#include "spca/methods.hpp"
#include "spca/metrics.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

namespace spca {
namespace {

Mat subspace_update(const Mat& X, const Mat& W)
{
    const Mat Y = X * W;
    return (X.transpose() * Y - W * (Y.transpose() * Y)) / double(X.rows());
}

WeightingSpec ones(Index k)
{
    return WeightingSpec{Vec::Ones(k)};
}

TEST(Weighting, LinearSpacedIsStrictlyDecreasing)
{
    const WeightingSpec w = WeightingSpec::linear_spaced(4);
    EXPECT_DOUBLE_EQ(w.lambdas(0), 1.0);
    EXPECT_DOUBLE_EQ(w.lambdas(3), 0.25);
    EXPECT_NO_THROW(w.validate());
    EXPECT_THROW(WeightingSpec{Vec(Eigen::Vector2d(0.5, 0.0))}.validate(), std::invalid_argument);
    EXPECT_THROW(WeightingSpec{Vec(Eigen::Vector2d(0.5, 0.7))}.validate(), std::invalid_argument);
}

TEST(LinearPcaGrad, EncoderOnlyVanishesAtOrthonormalWeights)
{
    const Mat W = random_semi_orthogonal<double>(5, 3, 1);
    const Mat X = test::random_matrix(8, 5, 2);
    EXPECT_LE(linear_pca_grad(X, W, LinearVariant::encoder_only).dW.norm(), 1e-12);
}

TEST(LinearPcaGrad, SubspaceVanishesWhenDataLiesInTheSpan)
{
    const Mat W = random_semi_orthogonal<double>(5, 2, 3);
    const Mat X = test::random_matrix(8, 2, 4) * W.transpose();
    const GradResult g = linear_pca_grad(X, W, LinearVariant::subspace);
    EXPECT_LE(g.dW.norm(), 1e-12);
    EXPECT_LE(g.recon_error, 1e-24);
}

TEST(LinearPcaGrad, TiedFullMatchesFiniteDifferences)
{
    const Mat X = test::random_matrix(8, 5, 5);
    const Mat W = test::random_matrix(5, 3, 6, 0.5);
    auto loss = [&](const Mat& M) { return 0.5 * (X - X * M * M.transpose()).rowwise().squaredNorm().mean(); };
    const GradResult g = linear_pca_grad(X, W, LinearVariant::tied_full);
    EXPECT_NEAR(g.loss, loss(W), 1e-12);
    EXPECT_NEAR(tied_loss(X, W), loss(W), 1e-12);
    EXPECT_LE(test::rel_error(g.dW, test::numeric_grad(loss, W)), 1e-6);
}

TEST(LinearPcaGrad, SubspaceIsTheFrozenEncoderGradient)
{
    const Mat X = test::random_matrix(8, 5, 7);
    const Mat W = test::random_matrix(5, 3, 8, 0.5);
    const Mat We = W;
    auto loss = [&](const Mat& M) { return 0.5 * (X - X * We * M.transpose()).rowwise().squaredNorm().mean(); };
    const GradResult g = linear_pca_grad(X, W, LinearVariant::subspace);
    EXPECT_LE(test::rel_error(g.dW, test::numeric_grad(loss, W)), 1e-6);
    EXPECT_LE((g.dW + subspace_update(X, W)).norm(), 1e-12);
}

TEST(LinearPcaGrad, TiedLossInvariantUnderRotationOfAnOrthonormalBasis)
{
    const Mat X = test::random_matrix(30, 6, 9);
    const Mat W = random_semi_orthogonal<double>(6, 3, 10);
    const double base = tied_loss(X, W);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Mat R = random_semi_orthogonal<double>(3, 3, 100 + s);
        EXPECT_NEAR(tied_loss(X, W * R), base, 1e-10);
    }
}

TEST(WeightedSubspace, UnitWeightsReduceToTheSubspaceRule)
{
    const Mat X = test::random_matrix(8, 5, 11);
    const Mat W = test::random_matrix(5, 3, 12, 0.5);
    const Mat sub = linear_pca_grad(X, W, LinearVariant::subspace).dW;
    for (WeightedVariant v : {WeightedVariant::v1, WeightedVariant::v2, WeightedVariant::v3})
        EXPECT_LE((weighted_subspace_grad(X, W, ones(3), v).dW - sub).norm(), 1e-12);
    const Vec sigma = (X * W).colwise().norm() / std::sqrt(8.0);
    EXPECT_LE((asymmetric_pca_loss_grad(X, W, ones(3), sigma).dW - sub).norm(), 1e-12);
}

TEST(WeightedSubspace, NonPositiveWeightsAreRejected)
{
    const Mat X = test::random_matrix(8, 3, 1);
    const Mat W = test::random_matrix(3, 2, 2);
    EXPECT_THROW(weighted_subspace_grad(X, W, WeightingSpec{Vec(Eigen::Vector2d(1.0, -0.5))}, WeightedVariant::v1),
                 std::invalid_argument);
}

TEST(WeightedSubspace, ClosedFormsOfTheThreeVariants)
{
    const Mat X = test::random_matrix(8, 5, 13);
    const Mat W = test::random_matrix(5, 3, 14, 0.5);
    const WeightingSpec l = WeightingSpec::linear_spaced(3);
    const Mat Y = X * W;
    const auto L = l.lambdas.asDiagonal();
    const Vec r = l.lambdas.cwiseSqrt();
    const double b = 8.0;
    const Mat v1 = (X.transpose() * Y - W * Y.transpose() * Y * l.lambdas.cwiseInverse().asDiagonal()) / b;
    const Mat v2 = (X.transpose() * Y * L - W * Y.transpose() * Y) / b;
    const Mat v3 = (X.transpose() * Y - W * r.asDiagonal() * Y.transpose() * Y * r.cwiseInverse().asDiagonal()) / b;
    EXPECT_LE((weighted_subspace_grad(X, W, l, WeightedVariant::v1).dW + v1).norm(), 1e-12);
    EXPECT_LE((weighted_subspace_grad(X, W, l, WeightedVariant::v2).dW + v2).norm(), 1e-12);
    EXPECT_LE((weighted_subspace_grad(X, W, l, WeightedVariant::v3).dW + v3).norm(), 1e-12);
}

TEST(AsymmetricLoss, MatchesFiniteDifferencesWithFrozenFactors)
{
    const Mat X = test::random_matrix(8, 5, 15);
    const Mat W = test::random_matrix(5, 3, 16, 0.5);
    const WeightingSpec l = WeightingSpec::linear_spaced(3);
    const Vec sigma(Eigen::Vector3d(1.3, 0.8, 0.6));
    const Mat Wsg = W;
    const Vec r = l.lambdas.cwiseSqrt();
    auto loss = [&](const Mat& M) {
        const Mat Y = X * M;
        const double recon = (X * Wsg * M.transpose() - X).rowwise().squaredNorm().mean();
        const double reg = (M * sigma.asDiagonal() * r.asDiagonal()).squaredNorm() - (M * sigma.asDiagonal()).squaredNorm();
        const double var = -(Y * r.asDiagonal()).rowwise().squaredNorm().mean() + Y.rowwise().squaredNorm().mean();
        return 0.5 * (recon + reg + var);
    };
    const GradResult g = asymmetric_pca_loss_grad(X, W, l, sigma);
    EXPECT_LE(test::rel_error(g.dW, test::numeric_grad(loss, W)), 1e-6);
}

TEST(Gha, SingleComponentIsOjasRule)
{
    const Mat X = test::random_matrix(10, 4, 17);
    const Mat w = test::random_matrix(4, 1, 18, 0.5);
    const Vec y = X * w;
    const Mat oja = (X.transpose() * y - w * y.squaredNorm()) / 10.0;
    EXPECT_LE((gha_grad(X, w, GhaVariant::plain).dW + oja).norm(), 1e-12);
}

TEST(Gha, EncoderTermVanishesAtOrthonormalWeights)
{
    const Mat X = test::random_matrix(10, 5, 19);
    const Mat W = random_semi_orthogonal<double>(5, 3, 20);
    const Mat plain = gha_grad(X, W, GhaVariant::plain).dW;
    EXPECT_LE((gha_grad(X, W, GhaVariant::with_encoder).dW - plain).norm(), 1e-12);
}

TEST(Gha, PlainRecoversOrderedAxesOfDiagonalData)
{
    Rng rng(3);
    const Mat X = randn<double>(2000, 3, rng) * Vec(Eigen::Vector3d(3, 2, 1)).asDiagonal();
    TrainConfig cfg = default_linear_config(100, 1);
    LinearRule rule;
    rule.family = LinearRule::Family::gha;
    rule.gha = GhaVariant::plain;
    const LinearFit fit = fit_linear(X, 3, rule, cfg);
    for (Index j = 0; j < 3; ++j) {
        EXPECT_GE(std::abs(fit.W.col(j).normalized()(j)), 0.99) << "column " << j;
    }
}

TEST(NestedDropout, CutProbabilitiesAreTruncatedGeometric)
{
    const Vec p = nested_cut_probabilities(4, 0.5);
    EXPECT_NEAR(p.sum(), 1.0, 1e-15);
    const double z = 0.5 + 0.25 + 0.125 + 0.0625;
    EXPECT_NEAR(p(0), 0.5 / z, 1e-15);
    EXPECT_NEAR(p(3), 0.0625 / z, 1e-15);
}

TEST(NestedDropout, EmpiricalFirstCutFrequency)
{
    Rng rng(123);
    const Index k = 4;
    const double rho = 0.9;
    int first = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const int j = sample_nested_cut(k, rho, rng);
        ASSERT_GE(j, 1);
        ASSERT_LE(j, k);
        first += j == 1;
    }
    const double expected = nested_cut_probabilities(k, rho)(0);
    EXPECT_NEAR(double(first) / draws, expected, 0.01);
}

TEST(NestedDropout, FullCutIsTheTiedGradient)
{
    const Mat X = test::random_matrix(8, 5, 21);
    const Mat W = test::random_matrix(5, 3, 22, 0.5);
    EXPECT_LE((nested_dropout_grad(X, W, 3).dW - linear_pca_grad(X, W, LinearVariant::tied_full).dW).norm(), 1e-12);
}

TEST(NestedDropout, FirstCutLeavesOnlyTheFirstColumn)
{
    const Mat X = test::random_matrix(8, 5, 23);
    const Mat W = test::random_matrix(5, 3, 24, 0.5);
    const Mat g = nested_dropout_grad(X, W, 1).dW;
    EXPECT_GT(g.col(0).norm(), 0.0);
    EXPECT_EQ(g.col(1).norm(), 0.0);
    EXPECT_EQ(g.col(2).norm(), 0.0);
}

TEST(NestedDropout, RecordsTheSampledCut)
{
    const Mat X = test::random_matrix(8, 5, 25);
    const Mat W = test::random_matrix(5, 3, 26, 0.5);
    Rng a(5), b(5);
    const GradResult g = nested_dropout(X, W, 0.9, a);
    ASSERT_EQ(g.cuts.size(), 1u);
    EXPECT_LE((g.dW - nested_dropout_grad(X, W, g.cuts[0]).dW).norm(), 1e-15);
    EXPECT_EQ(g.cuts[0], sample_nested_cut(3, 0.9, b));
}

TEST(NestedDropout, MaskedLossMatchesFiniteDifferences)
{
    const Mat X = test::random_matrix(8, 5, 27);
    const Mat W = test::random_matrix(5, 3, 28, 0.5);
    auto loss = [&](const Mat& M) {
        Mat Y = X * M;
        Y.rightCols(1).setZero();
        return 0.5 * (Y * M.transpose() - X).rowwise().squaredNorm().mean();
    };
    EXPECT_LE(test::rel_error(nested_dropout_grad(X, W, 2).dW, test::numeric_grad(loss, W)), 1e-6);
}

TEST(NestedDropout, SampledGradientAveragesToTheSummedOracle)
{
    // The summed form weighs every cut by its probability; only viable for small k.
    const Index k = 4;
    const double rho = 0.7;
    const Mat X = test::random_matrix(16, 6, 29);
    const Mat W = test::random_matrix(6, k, 30, 0.5);
    const Vec p = nested_cut_probabilities(k, rho);
    Mat summed = Mat::Zero(6, k);
    for (int j = 1; j <= k; ++j)
        summed += p(j - 1) * nested_dropout_grad(X, W, j).dW;
    Rng rng(31);
    Mat mean = Mat::Zero(6, k);
    const int draws = 40000;
    for (int i = 0; i < draws; ++i)
        mean += nested_dropout(X, W, rho, rng).dW;
    mean /= double(draws);
    EXPECT_LE(test::rel_error(mean, summed), 0.02);
}

TEST(WeightedVariance, ZeroWeightsGiveTheTiedGradient)
{
    const Mat X = test::random_matrix(8, 5, 29);
    const Mat W = test::random_matrix(5, 3, 30, 0.5);
    const WeightingSpec zero{Vec::Zero(3)};
    const Mat tied = linear_pca_grad(X, W, LinearVariant::tied_full).dW;
    EXPECT_LE((weighted_variance_grad(X, W, zero, 1.0, VarianceWeighting::fixed).dW - tied).norm(), 1e-12);
}

TEST(WeightedVariance, MatchesFiniteDifferences)
{
    const Mat X = test::random_matrix(8, 5, 31);
    const Mat W = test::random_matrix(5, 3, 32, 0.5);
    const WeightingSpec l = WeightingSpec::linear_spaced(3);
    const Vec r = l.lambdas.cwiseSqrt();
    for (double alpha : {-1.0, 1.0}) {
        auto loss = [&](const Mat& M) {
            return 0.5 * ((X - X * M * M.transpose()).rowwise().squaredNorm().mean() -
                          alpha * (X * M * r.asDiagonal()).rowwise().squaredNorm().mean());
        };
        const GradResult g = weighted_variance_grad(X, W, l, alpha, VarianceWeighting::fixed);
        EXPECT_LE(test::rel_error(g.dW, test::numeric_grad(loss, W)), 1e-6) << alpha;
    }
}

TEST(WeightedVariance, ConvergedColumnNormsFollowTheStationaryIdentity)
{
    Rng rng(4);
    const Mat X = randn<double>(4000, 2, rng) * Vec(Eigen::Vector2d(2.0, 1.0)).asDiagonal();
    LinearRule rule;
    rule.family = LinearRule::Family::weighted_variance;
    rule.weighting = VarianceWeighting::fixed;
    rule.alpha = -1.0;
    rule.lambdas = WeightingSpec{Vec(Eigen::Vector2d(0.5, 0.25))};
    const LinearFit fit = fit_linear(X, 2, rule, default_linear_config(100, 2));
    EXPECT_NEAR(fit.W.col(0).squaredNorm(), 1.0 - 0.25, 0.02 * 0.75);
    EXPECT_NEAR(fit.W.col(1).squaredNorm(), 1.0 - 0.125, 0.02 * 0.875);
}

class WeightedStationary : public ::testing::Test {
protected:
    static LinearFit fit(WeightedVariant v)
    {
        Rng rng(6);
        const Mat X = randn<double>(4000, 2, rng) * Vec(Eigen::Vector2d(2.0, 1.0)).asDiagonal();
        LinearRule rule;
        rule.family = LinearRule::Family::weighted_subspace;
        rule.weighted = v;
        return fit_linear(X, 2, rule, default_linear_config(100, 3));
    }
};

TEST_F(WeightedStationary, V1ColumnNormsAreRootLambda)
{
    const LinearFit f = fit(WeightedVariant::v1);
    const Vec l = WeightingSpec::linear_spaced(2).lambdas;
    for (Index j = 0; j < 2; ++j)
        EXPECT_NEAR(f.W.col(j).norm(), std::sqrt(l(j)), 0.02 * std::sqrt(l(j))) << j;
}

TEST_F(WeightedStationary, V3ColumnNormsAreOne)
{
    const LinearFit f = fit(WeightedVariant::v3);
    for (Index j = 0; j < 2; ++j)
        EXPECT_NEAR(f.W.col(j).norm(), 1.0, 1e-3) << j;
}

TEST(AxisAlignment, SymmetryBreakingRulesRecoverTheSvdAxes)
{
    const Vec stds = (Vec(6) << 4, 3, 2, 1.5, 1, 0.5).finished();
    const RotatedGaussian data = gen_rotated_gaussian(stds, 2000, 7, 11);
    const Mat axes = pca_fit_svd<double>(data.X, 4).W;
    for (const std::string name : {"weighted-v1", "weighted-v2", "weighted-v3", "asymmetric", "gha", "gha-encoder",
                                   "gha-subspace", "gha-recon", "nested-dropout", "wvar-fixed", "wvar-stochastic",
                                   "wvar-proportional"}) {
        const LinearFit f = fit_linear(data.X, 4, linear_rule_from_string(name), default_linear_config());
        const MatchReport m = match_columns(f.W, axes);
        EXPECT_GE(m.min_corr(), 0.98) << name;
    }
    for (const std::string name : {"tied", "subspace"}) {
        const LinearFit f = fit_linear(data.X, 4, linear_rule_from_string(name), default_linear_config());
        EXPECT_LE(projector_distance(f.W, axes), 1e-2) << name;
    }
}

TEST(LinearRules, NamesRoundTripAndUnknownIsRejected)
{
    for (const std::string& name : linear_rule_names())
        EXPECT_NO_THROW(linear_rule_from_string(name)) << name;
    EXPECT_THROW(linear_rule_from_string("oja2"), std::invalid_argument);
}

}  // namespace
}  // namespace spca
