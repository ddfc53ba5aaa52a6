#include "spca/linalg.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

namespace spca {
namespace {

TEST(SvdThin, IdentityHasUnitSingularValues)
{
    const SvdResult<double> r = svd_thin<double>(Mat::Identity(3, 3), 3);
    EXPECT_LE((r.S - Vec::Ones(3)).norm(), 1e-14);
    EXPECT_LE((r.U * r.V.transpose() - Mat::Identity(3, 3)).norm(), 1e-12);
}

TEST(SvdThin, DiagonalCaseGivesIdentityAxesUnderSignConvention)
{
    Mat X(2, 2);
    X << 3, 0, 0, 2;
    const SvdResult<double> r = svd_thin<double>(X, 2);
    EXPECT_NEAR(r.S(0), 3.0, 1e-14);
    EXPECT_NEAR(r.S(1), 2.0, 1e-14);
    EXPECT_LE((r.V - Mat::Identity(2, 2)).norm(), 1e-14);
}

TEST(SvdThin, RandomRoundTripAndInvariants)
{
    const Mat X = test::random_matrix(6, 4, 7);
    const SvdResult<double> r = svd_thin<double>(X, 4);
    EXPECT_LE((r.U * r.S.asDiagonal() * r.V.transpose() - X).norm() / X.norm(), 1e-10);
    EXPECT_LE(orth_residual(r.U), 1e-10);
    EXPECT_LE(orth_residual(r.V), 1e-10);
    for (Index j = 0; j + 1 < r.S.size(); ++j)
        EXPECT_GE(r.S(j), r.S(j + 1));
    EXPECT_GE(r.S.minCoeff(), 0.0);
    for (Index j = 0; j < 4; ++j) {
        Index arg = 0;
        r.V.col(j).cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(r.V(arg, j), 0.0) << "column " << j;
    }
}

TEST(SvdThin, RejectsBadRankAndNonFiniteInput)
{
    const Mat X = test::random_matrix(3, 2, 1);
    EXPECT_THROW(svd_thin<double>(X, 3), std::invalid_argument);
    EXPECT_THROW(svd_thin<double>(X, 0), std::invalid_argument);
    Mat bad = X;
    bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(svd_thin<double>(bad, 1), std::invalid_argument);
    EXPECT_THROW(DataMatrix<double>{bad}, std::invalid_argument);
}

TEST(SvdThin, CovarianceEigenvaluesAreSquaredSingularValuesOverN)
{
    const Mat X = centred(test::random_matrix(50, 5, 3));
    const SvdResult<double> r = svd_thin<double>(X, 5);
    const Mat C = X.transpose() * X / double(X.rows());
    Eigen::SelfAdjointEigenSolver<Mat> eig(C);
    const Vec ev = eig.eigenvalues().reverse();
    const Vec s2 = r.S.array().square() / double(X.rows());
    EXPECT_LE(((ev - s2).array().abs() / s2.array()).maxCoeff(), 1e-8);
}

TEST(PcaFitSvd, RecoversAxisStandardDeviations)
{
    Rng rng(1);
    const Mat X = randn<double>(10000, 2, rng) * Vec(Eigen::Vector2d(2.0, 1.0)).asDiagonal();
    const PcaBasis<double> b = pca_fit_svd<double>(X, 2);
    EXPECT_NEAR(b.sigma(0), 2.0, 0.1);
    EXPECT_NEAR(b.sigma(1), 1.0, 0.05);
    EXPECT_LE((b.W.cwiseAbs() - Mat::Identity(2, 2)).norm(), 0.05);
    EXPECT_LE(orth_residual(b.W), 1e-8);
}

TEST(PcaFitSvd, ProjectorMatchesCovarianceEigendecomposition)
{
    const Mat X = centred(test::random_matrix(40, 4, 5));
    const PcaBasis<double> b = pca_fit_svd<double>(X, 4);
    Eigen::SelfAdjointEigenSolver<Mat> eig(X.transpose() * X / double(X.rows()));
    const Mat E = eig.eigenvectors();
    EXPECT_LE(projector_distance(b.W, E), 1e-8);
    // Rank-2 projector too, which depends on the eigenvalue order.
    EXPECT_LE(projector_distance(Mat(b.W.leftCols(2)), Mat(E.rightCols(2))), 1e-8);
}

TEST(PcaFitSvd, ConstantColumnSortsLastWithZeroSigma)
{
    Mat X = test::random_matrix(30, 3, 9);
    X.col(1).setConstant(4.0);
    const PcaBasis<double> b = pca_fit_svd<double>(X, 3);
    EXPECT_NEAR(b.sigma(2), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(b.W(1, 2)), 1.0, 1e-10);
    EXPECT_GE(b.sigma(0), b.sigma(1));
}

TEST(PcaFitSvd, RejectsTooManyComponents)
{
    EXPECT_THROW(pca_fit_svd<double>(test::random_matrix(10, 3, 1), 4), std::invalid_argument);
    EXPECT_THROW(pca_fit_svd<double>(test::random_matrix(1, 3, 1), 1), std::invalid_argument);
}

TEST(Moments, ConstantBatch)
{
    const Moments<double> m = batch_moments(Mat::Constant(3, 1, 2.0));
    EXPECT_DOUBLE_EQ(m.mu(0), 2.0);
    EXPECT_DOUBLE_EQ(m.var(0), 0.0);
}

TEST(Moments, BiasedVariance)
{
    Mat Y(2, 1);
    Y << 1, -1;
    const Moments<double> m = batch_moments(Y);
    EXPECT_DOUBLE_EQ(m.mu(0), 0.0);
    EXPECT_DOUBLE_EQ(m.var(0), 1.0);
}

TEST(Moments, EmaUpdateFollowsTheRecurrence)
{
    MomentState<double> s;
    s.mu_hat = Vec::Zero(1);
    s.var_hat = Vec::Ones(1);
    s.alpha = 0.9;
    Mat Y(2, 1);
    Y << 3, -1;  // mean 1, biased variance 4
    const Moments<double> m = ema_update(s, Y);
    EXPECT_NEAR(m.mu(0), 0.1, 1e-15);
    EXPECT_NEAR(m.var(0), 1.3, 1e-15);
    EXPECT_NEAR(s.var_hat(0), 1.3, 1e-15);
}

TEST(Moments, EmptyBatchIsRejected) { EXPECT_THROW(batch_moments(Mat(0, 2)), std::invalid_argument); }

TEST(Moments, FlooredStdNeverInvertsZero)
{
    const Vec s = floored_std(Vec(Eigen::Vector2d(0.0, 4.0)));
    EXPECT_DOUBLE_EQ(s(0), std::sqrt(kVarianceFloor));
    EXPECT_DOUBLE_EQ(s(1), 2.0);
}

TEST(RandomSemiOrthogonal, OrthonormalAndDeterministic)
{
    EXPECT_LE(orth_residual(random_semi_orthogonal<double>(3, 3, 0)), 1e-10);
    const Mat a = random_semi_orthogonal<double>(8, 4, 1);
    const Mat b = random_semi_orthogonal<double>(8, 4, 1);
    const Mat c = random_semi_orthogonal<double>(8, 4, 2);
    EXPECT_TRUE(a == b);
    EXPECT_GT((a - c).norm(), 0.1);
    EXPECT_LE(orth_residual(a), 1e-10);
    EXPECT_THROW(random_semi_orthogonal<double>(3, 4, 0), std::invalid_argument);
}

TEST(Indeterminacy, BlockRotationCommutesWithRepeatedSingularValues)
{
    const double t = 0.37;
    Mat R = Mat::Identity(3, 3);
    R.topLeftCorner(2, 2) << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    const Mat S = Vec(Eigen::Vector3d(2.0, 2.0, 1.0)).asDiagonal();
    EXPECT_LE((S * R - R * S).norm(), 1e-12);
}

TEST(Indeterminacy, RotatedEqualVarianceBasisGivesTheSameReconstruction)
{
    const Mat U = random_semi_orthogonal<double>(20, 3, 4);
    const Mat V = random_semi_orthogonal<double>(3, 3, 5);
    const Mat X = U * Vec(Eigen::Vector3d(2.0, 2.0, 1.0)).asDiagonal() * V.transpose();
    const Mat V2 = svd_thin<double>(X, 2).V;
    const double t = 1.1;
    Mat Rs(2, 2);
    Rs << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    const Mat V2r = V2 * Rs;
    EXPECT_LE((X * V2 * V2.transpose() - X * V2r * V2r.transpose()).norm(), 1e-10);
}

}  // namespace
}  // namespace spca
