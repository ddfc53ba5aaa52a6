#include "spca/datagen.hpp"
#include "spca/gradcheck.hpp"
#include "spca/linear_pca.hpp"
#include "spca/methods.hpp"
#include "spca/sigma_pca.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

namespace spca {
namespace {

SigmaPcaModel trainable_model(const Mat& W, const Vec& sigma, NonlinearitySpec h)
{
    SigmaPcaModel m;
    m.W = W;
    m.sigma = sigma;
    m.sigma_mode = SigmaMode::trainable;
    m.sigma_l2 = 0.0;
    m.nonlinearity = h;
    return m;
}

double scaled_tanh(double z, double a) { return a * std::tanh(z / a); }

TEST(Nonlinearity, ScaledTanhAtTheOrigin)
{
    const Activation act = nonlinearity_eval(NonlinearitySpec::scaled_tanh(4.0), Mat::Zero(1, 1));
    EXPECT_EQ(act.h(0, 0), 0.0);
    EXPECT_EQ(act.dh(0, 0), 1.0);
}

TEST(Nonlinearity, LargeScaleApproachesTheIdentity)
{
    const Activation act = nonlinearity_eval(NonlinearitySpec::scaled_tanh(100.0), Mat::Constant(1, 1, 0.5));
    EXPECT_LT(act.h(0, 0), 0.5);
    EXPECT_LE(std::abs(act.h(0, 0) - 0.5), 1e-5);
}

TEST(Nonlinearity, ExactDerivativeFormsAndClamp)
{
    Mat z(1, 5);
    z << -3, -0.7, 0.2, 1.4, 5;
    const Activation t = nonlinearity_eval(NonlinearitySpec::scaled_tanh(2.0), z);
    for (Index i = 0; i < z.size(); ++i) {
        EXPECT_NEAR(t.h(i), scaled_tanh(z(i), 2.0), 1e-15);
        EXPECT_NEAR(t.dh(i), 1.0 - t.h(i) * t.h(i) / 4.0, 1e-15);
        const double fd = (scaled_tanh(z(i) + 1e-6, 2.0) - scaled_tanh(z(i) - 1e-6, 2.0)) / 2e-6;
        EXPECT_NEAR(t.dh(i), fd, 1e-8);
    }
    const Activation c = nonlinearity_eval(NonlinearitySpec::hard_tanh(1.0), z);
    EXPECT_EQ(c.h(0), -1.0);
    EXPECT_EQ(c.h(2), 0.2);
    EXPECT_EQ(c.h(4), 1.0);
    EXPECT_EQ(c.dh(0), 0.0);
    EXPECT_EQ(c.dh(2), 1.0);
    const Activation l = nonlinearity_eval(NonlinearitySpec::asym_const(), z);
    EXPECT_NEAR(l.h(1), 1.6 * std::tanh(-0.7), 1e-15);
    EXPECT_TRUE((l.dh.array() == 1.0).all());
}

TEST(Nonlinearity, InvalidScaleIsRejected)
{
    EXPECT_THROW(NonlinearitySpec::scaled_tanh(0.0).validate(), std::invalid_argument);
    EXPECT_THROW(nonlinearity_from_string("relu"), std::invalid_argument);
}

TEST(Nonlinearity, TanhStandardDeviationConstants)
{
    Rng rng(2024);
    const Mat z = randn<double>(1000000, 1, rng);
    auto sd = [](const Mat& m) { return std::sqrt((m.array() - m.mean()).square().mean()); };
    // Reference values from adaptive quadrature of a^2 tanh^2(z/a) against the
    // normal density; the Monte-Carlo error at n = 1e6 is about 5e-4.
    EXPECT_NEAR(sd(Mat(z.array().tanh())), 0.627929, 2e-3);
    EXPECT_NEAR(sd(nonlinearity_eval(NonlinearitySpec::scaled_tanh(3.0), z).h), 0.910177, 2e-3);
}

TEST(Forward, LinearOrthonormalReducesToLinearReconstruction)
{
    const Mat X = centred(test::random_matrix(12, 5, 1));
    SigmaPcaModel m;
    m.W = random_semi_orthogonal<double>(5, 3, 2);
    m.nonlinearity = NonlinearitySpec::linear();
    const ForwardCache c = sigma_pca_forward(m, X);
    EXPECT_LE((c.xhat - X * m.W * m.W.transpose()).norm(), 1e-12);
    EXPECT_LE((c.yhat - c.y).norm(), 1e-10);
}

TEST(Forward, ZeroBatchFloorsSigma)
{
    SigmaPcaModel m;
    m.W = random_semi_orthogonal<double>(4, 2, 3);
    const ForwardCache c = sigma_pca_forward(m, Mat::Zero(6, 4));
    EXPECT_TRUE(c.sigma_floored);
    EXPECT_GT(c.sigma.minCoeff(), 0.0);
    EXPECT_EQ(c.y.norm(), 0.0);
    EXPECT_EQ(c.z.norm(), 0.0);
    EXPECT_EQ(c.xhat.norm(), 0.0);
    EXPECT_EQ(c.yhat.norm(), 0.0);
}

TEST(Forward, StandardisedLatentsHaveUnitBatchVariance)
{
    const Mat X = centred(test::random_matrix(40, 6, 4, 3.0));
    SigmaPcaModel m;
    m.W = random_semi_orthogonal<double>(6, 3, 5);
    m.nonlinearity = NonlinearitySpec::scaled_tanh(4.0);
    const ForwardCache c = sigma_pca_forward(m, X);
    const Moments<double> mz = batch_moments(c.z);
    EXPECT_LE((mz.var - Vec::Ones(3)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SigmaPcaGrad, LinearOrthonormalStopgradVanishes)
{
    const Mat X = centred(test::random_matrix(12, 5, 6));
    SigmaPcaModel m;
    m.W = random_semi_orthogonal<double>(5, 3, 7);
    m.nonlinearity = NonlinearitySpec::linear();
    EXPECT_LE(sigma_pca_grad(m, X).dW.norm(), 1e-12);
}

TEST(SigmaPcaGrad, StopgradMatchesFiniteDifferencesWithSigmaFrozen)
{
    const Mat X = test::random_matrix(8, 5, 8);
    const Mat W = test::random_matrix(5, 3, 9, 0.5);
    const Vec sigma(Eigen::Vector3d(1.2, 0.9, 0.7));
    const double a = 4.0;
    const Mat Wd = W;
    auto loss = [&](const Mat& M) {
        const Mat z = X * M * sigma.cwiseInverse().asDiagonal();
        const Mat h = z.unaryExpr([&](double v) { return scaled_tanh(v, a); });
        return 0.5 * (X - h * sigma.asDiagonal() * Wd.transpose()).rowwise().squaredNorm().mean();
    };
    const GradResult g = sigma_pca_grad(trainable_model(W, sigma, NonlinearitySpec::scaled_tanh(a)), X);
    EXPECT_NEAR(g.loss, loss(W), 1e-12);
    EXPECT_LE(test::rel_error(g.dW, test::numeric_grad(loss, W)), 1e-5);
}

TEST(SigmaPcaGrad, FullModeAddsTheDecoderTerm)
{
    const Mat X = test::random_matrix(8, 5, 10);
    const Mat W = test::random_matrix(5, 3, 11, 0.5);
    const Vec sigma(Eigen::Vector3d(1.1, 0.8, 0.5));
    auto loss = [&](const Mat& M) {
        const Mat z = X * M * sigma.cwiseInverse().asDiagonal();
        const Mat h = z.unaryExpr([](double v) { return scaled_tanh(v, 2.0); });
        return 0.5 * (X - h * sigma.asDiagonal() * M.transpose()).rowwise().squaredNorm().mean();
    };
    SigmaPcaModel m = trainable_model(W, sigma, NonlinearitySpec::scaled_tanh(2.0));
    m.decoder_mode = DecoderMode::full;
    EXPECT_LE(test::rel_error(sigma_pca_grad(m, X).dW, test::numeric_grad(loss, W)), 1e-5);
}

TEST(SigmaPcaGrad, LinearLossEqualsTheTiedLossForAnySigma)
{
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Mat X = test::random_matrix(10, 5, 20 + s);
        const Mat W = test::random_matrix(5, 3, 30 + s, 0.5);
        const Vec sigma = test::random_matrix(3, 1, 40 + s).cwiseAbs().array() + 0.1;
        const GradResult g = sigma_pca_grad(trainable_model(W, sigma, NonlinearitySpec::linear()), X);
        EXPECT_NEAR(g.loss, tied_loss(X, W), 1e-12);
    }
}

TEST(SigmaPcaGrad, StopgradUpdateAgreesWithItsLatentForm)
{
    // With orthonormal W the encoder update xᵀ((x̂ - x)W ⊙ h') equals xᵀ((ŷ - y) ⊙ h').
    const Mat X = centred(test::random_matrix(20, 6, 12));
    SigmaPcaModel m;
    m.W = random_semi_orthogonal<double>(6, 3, 13);
    m.nonlinearity = NonlinearitySpec::scaled_tanh(1.5);
    const ForwardCache c = sigma_pca_forward(m, X);
    const Mat a = X.transpose() * ((c.xhat - X) * m.W).cwiseProduct(c.dh) / 20.0;
    const Mat b = X.transpose() * (c.yhat - c.y).cwiseProduct(c.dh) / 20.0;
    EXPECT_LE((a - b).norm(), 1e-12);
    EXPECT_LE((sigma_pca_grad(m, X).dW - a).norm(), 1e-12);
}

TEST(SigmaPcaGrad, DecoderDominatesAtOrthonormalLinearWeights)
{
    const Mat X = centred(test::random_matrix(30, 6, 14));
    SigmaPcaModel m;
    m.W = random_semi_orthogonal<double>(6, 2, 15);
    m.nonlinearity = NonlinearitySpec::linear();
    const Mat encoder = sigma_pca_grad(m, X).dW;
    m.decoder_mode = DecoderMode::full;
    const Mat decoder = sigma_pca_grad(m, X).dW - encoder;
    EXPECT_LE(encoder.norm(), 1e-12);
    // Decoder part is (x̂ - x)ᵀy / b; bounded below through the residual's spread.
    const Mat Y = X * m.W;
    const Mat R = X * m.W * m.W.transpose() - X;
    EXPECT_LE((decoder - R.transpose() * Y / 30.0).norm(), 1e-12);
    EXPECT_GT(decoder.norm(), 1e-3);
}

TEST(TrainableSigma, ExactReconstructionLeavesTheL2Term)
{
    const Mat X = centred(test::random_matrix(10, 4, 16));
    SigmaPcaModel m = trainable_model(random_semi_orthogonal<double>(4, 4, 17), Vec(Eigen::Vector4d(1, 2, 3, 4)),
                                      NonlinearitySpec::linear());
    m.sigma_l2 = 0.01;
    const ForwardCache c = sigma_pca_forward(m, X);
    EXPECT_LE((trainable_sigma_grad(c, m.sigma, m.sigma_l2) - 0.02 * m.sigma).norm(), 1e-12);
}

TEST(TrainableSigma, MatchesFiniteDifferences)
{
    const Mat X = test::random_matrix(8, 5, 18);
    const Mat W = test::random_matrix(5, 3, 19, 0.5);
    const Vec sigma(Eigen::Vector3d(1.4, 0.9, 0.6));
    const double l2 = 1e-3;
    auto loss = [&](const Mat& s) {
        const Vec sv = s;
        const Mat z = X * W * sv.cwiseInverse().asDiagonal();
        const Mat h = z.unaryExpr([](double v) { return scaled_tanh(v, 4.0); });
        return 0.5 * (X - h * sv.asDiagonal() * W.transpose()).rowwise().squaredNorm().mean() + l2 * sv.squaredNorm();
    };
    SigmaPcaModel m = trainable_model(W, sigma, NonlinearitySpec::scaled_tanh(4.0));
    m.sigma_l2 = l2;
    const GradResult g = sigma_pca_grad(m, X);
    EXPECT_NEAR(g.loss, loss(sigma), 1e-12);
    EXPECT_LE(test::rel_error(g.dsigma, test::numeric_grad(loss, sigma)), 1e-5);
}

TEST(Ordering, TriangularVariantClosedForm)
{
    const Mat X = centred(test::random_matrix(15, 5, 20));
    SigmaPcaModel m;
    m.W = random_semi_orthogonal<double>(5, 3, 21);
    m.nonlinearity = NonlinearitySpec::scaled_tanh(2.0);
    m.ordering = Ordering::triangular;
    m.triangular_variant = 3;
    const ForwardCache c = sigma_pca_forward(m, X);
    const Mat expected = m.W * strict_upper(Mat(c.hz.transpose() * c.y)) / 15.0;
    EXPECT_LE((ordering_term_grad(m, c) - expected).norm(), 1e-12);
}

TEST(Ordering, DiagonalProductsContributeNothing)
{
    // Orthogonal latent columns make every product in the triangular family diagonal.
    Mat Y = Mat::Zero(4, 2);
    Y << 1, 0, -1, 0, 0, 2, 0, -2;
    const Mat W = random_semi_orthogonal<double>(2, 2, 22);
    const Mat X = Y * W.transpose();
    SigmaPcaModel m;
    m.W = W;
    m.nonlinearity = NonlinearitySpec::scaled_tanh(2.0);
    m.ordering = Ordering::triangular;
    const ForwardCache c = sigma_pca_forward(m, X);
    for (int v = 1; v <= 6; ++v) {
        m.triangular_variant = v;
        EXPECT_LE(ordering_term_grad(m, c).norm(), 1e-12) << v;
    }
}

TEST(Latent, OrthonormalLinearModelHasNoLatentGradient)
{
    const Mat X = centred(test::random_matrix(12, 5, 23));
    SigmaPcaModel m;
    m.W = random_semi_orthogonal<double>(5, 3, 24);
    m.nonlinearity = NonlinearitySpec::linear();
    for (LatentVariant v : {LatentVariant::wtw_symreg, LatentVariant::tri_wtw_symreg, LatentVariant::plain_orthreg,
                            LatentVariant::plus_linear})
        EXPECT_LE(latent_recon_grad(m, X, v).dW.norm(), 1e-12);
}

TEST(Rica, VanishingPenaltyIsTheSubspaceRule)
{
    const Mat X = test::random_matrix(10, 5, 25);
    const Mat W = test::random_matrix(5, 3, 26, 0.5);
    const Mat sub = linear_pca_grad(X, W, LinearVariant::subspace).dW;
    EXPECT_LE((rica_grad(X, W, RicaSpec{RicaPenalty::l1, 0.0, true}).dW - sub).norm(), 1e-12);
    EXPECT_LE((rica_grad(X, W, RicaSpec{RicaPenalty::logcosh, 1e-13, true}).dW - sub).norm(), 1e-10);
}

TEST(Rica, AdaptiveBetaScalesWithTheInputNorm)
{
    const Mat X = test::random_matrix(10, 5, 27);
    const Mat W = test::random_matrix(5, 3, 28, 0.5);
    const RicaSpec spec{RicaPenalty::l1, 0.3, true};
    // Every term is homogeneous of degree 2 in x once beta follows E||x||.
    EXPECT_LE(test::rel_error(rica_grad(100.0 * X, W, spec).dW, 1e4 * rica_grad(X, W, spec).dW), 1e-12);
    EXPECT_THROW(rica_grad(X, W, RicaSpec{RicaPenalty::l1, 1.5, true}), std::invalid_argument);
}

TEST(Skew, SkewTermIsAntisymmetricAndVanishesForTheIdentity)
{
    const Mat X = test::random_matrix(10, 5, 29);
    const Mat W = test::random_matrix(5, 3, 30, 0.5);
    const Mat Y = X * W;
    const Mat H = Y.array().tanh().matrix();
    const Mat M = Y.transpose() * H - H.transpose() * Y;
    EXPECT_LE((M.transpose() + M).norm(), 1e-12);
    const Mat sub = linear_pca_grad(X, W, LinearVariant::subspace).dW;
    const GradResult g = skew_symmetric_grad(X, W, NonlinearitySpec::linear(), SkewBeta::constant, SkewForm::skew);
    EXPECT_LE((g.dW - sub).norm(), 1e-12);
}

TEST(Noncentred, CentredDataMatchesTheCentredGradient)
{
    const Mat X = centred(test::random_matrix(12, 5, 31));
    SigmaPcaModel m;
    m.W = random_semi_orthogonal<double>(5, 3, 32);
    m.nonlinearity = NonlinearitySpec::scaled_tanh(2.0);
    const Mat base = sigma_pca_grad(m, X).dW;
    m.mu_mode = MuMode::batch;
    EXPECT_LE((noncentred_grad(m, X, NoncentredVariant::wrap).dW - base).norm(), 1e-10);
    EXPECT_LE((noncentred_grad(m, X, NoncentredVariant::bound).dW - base).norm(), 1e-10);
}

TEST(SortComponents, DescendingAndStable)
{
    SigmaPcaModel m;
    m.W = test::random_matrix(4, 3, 33);
    m.sigma = Vec(Eigen::Vector3d(1, 3, 2));
    auto [sorted, perm] = sort_components(m);
    EXPECT_EQ(perm, (std::vector<Index>{1, 2, 0}));
    EXPECT_EQ(sorted.sigma, Vec(Eigen::Vector3d(3, 2, 1)));
    EXPECT_TRUE(sorted.W.col(0) == m.W.col(1));

    m.sigma = Vec(Eigen::Vector3d(3, 2, 1));
    EXPECT_EQ(sort_components(m).second, (std::vector<Index>{0, 1, 2}));

    m.sigma = Vec(Eigen::Vector3d(1, 2, 2));
    EXPECT_EQ(sort_components(m).second, (std::vector<Index>{1, 2, 0}));
}

// At a stationary point of the identity-derivative update,
// Σ² = E(yᵀh(yΣ⁻¹)) Σ WᵀW; with a single free-norm column that is
// σ = ||w||² E(y h(y/σ)), which is σ = E(y h(y/σ)) when ||w|| = 1.
TEST(Stationary, OneDimensionalSigmaIdentity)
{
    auto [X, truth] = gen_points_2d(PointDist::laplace, 4000, 0.3, 5, Vec(Eigen::Vector2d(2.0, 1.0)));
    const double a = 4.0;
    SigmaPcaModel m;
    m.nonlinearity = NonlinearitySpec::scaled_tanh(a);
    m.nonlinearity.derivative = DerivativeMode::identity;
    TrainConfig cfg = default_signal_config(300, 1);
    cfg.checkpoint = CheckpointPolicy::last;
    cfg.constraints.unit_norm = ConstraintSpec::UnitNorm::none;
    const SigmaPcaFit fit = fit_sigma_pca(X, 1, m, cfg);
    const Vec w = fit.train.params.W.col(0);
    const Vec y = X * w;
    const double sigma = std::sqrt(y.squaredNorm() / double(y.size()));
    const double e = y.unaryExpr([&](double v) { return v * scaled_tanh(v / sigma, a); }).mean();
    EXPECT_NEAR(w.squaredNorm() * e, sigma, 0.02 * sigma);
}

TEST(GradientSuite, EveryStatedLossPassesCentralDifferences)
{
    for (const GradSuiteEntry& e : run_gradient_suite())
        EXPECT_TRUE(e.passed) << e.module << "/" << e.op << " rel " << e.max_rel_error;
}

}  // namespace
}  // namespace spca
