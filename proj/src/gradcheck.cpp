#include "spca/gradcheck.hpp"

#include "spca/constraints.hpp"
#include "spca/ica.hpp"
#include "spca/linear_pca.hpp"
#include "spca/methods.hpp"
#include "spca/optim.hpp"
#include "spca/sigma_pca.hpp"

#include <functional>

namespace spca {

namespace {

constexpr Index kBatch = 12;
constexpr Index kP = 6;
constexpr Index kK = 3;

struct Instance {
    Mat X;   // b x p, not centred
    Mat Xc;  // column-centred X
    Mat W;   // p x k
    Rng rng;
};

Instance make_instance(Rng& rng)
{
    Instance in;
    Vec scale(kP);
    for (Index j = 0; j < kP; ++j)
        scale(j) = 2.0 - 0.25 * double(j);
    in.X = randn<double>(kBatch, kP, rng) * scale.asDiagonal();
    in.X.rowwise() += randn<double>(1, kP, rng).row(0);
    in.Xc = centred(in.X);
    in.W = randn<double>(kP, kK, rng) / std::sqrt(double(kP));
    in.rng = Rng(rng());
    return in;
}

double mean_sq(const Mat& R) { return R.squaredNorm() / double(R.rows()); }

// Loss and analytic gradient of one instance, both over the same flat parameter vector.
struct Case {
    std::function<double(const Vec&)> loss;
    Vec theta;
    Vec analytic;
};

using CaseFactory = std::function<Case(Instance&)>;

struct Spec {
    std::string module;
    std::string op;
    CaseFactory make;
};

Case w_case(const Mat& W0, const Mat& dW, std::function<double(const Mat&)> loss_of_W)
{
    const Index p = W0.rows(), k = W0.cols();
    return {[=](const Vec& t) { return loss_of_W(unflatten(t, p, k)); }, flatten(W0), flatten(dW)};
}

Mat hval(const NonlinearitySpec& h, const Mat& z) { return nonlinearity_eval(h, z).h; }

Vec frozen_sigma(const Mat& y) { return floored_std(batch_moments(y).var); }

// ---- linear PCA -----------------------------------------------------------

Mat upper_yty(const Mat& X, const Mat& W, bool strict)
{
    const Mat Y = X * W;
    const Mat M = Y.transpose() * Y / double(X.rows());
    return strict ? strict_upper(M) : upper(M);
}

std::vector<Spec> linear_specs()
{
    std::vector<Spec> s;
    s.push_back({"linear_pca", "tied_full", [](Instance& in) {
                     const Mat X = in.Xc;
                     return w_case(in.W, linear_pca_grad(X, in.W, LinearVariant::tied_full).dW,
                                   [X](const Mat& W) { return 0.5 * mean_sq(X * W * W.transpose() - X); });
                 }});
    s.push_back({"linear_pca", "subspace", [](Instance& in) {
                     const Mat X = in.Xc, W0 = in.W;
                     return w_case(W0, linear_pca_grad(X, W0, LinearVariant::subspace).dW,
                                   [X, W0](const Mat& W) { return 0.5 * mean_sq(X * W0 * W.transpose() - X); });
                 }});
    s.push_back({"linear_pca", "encoder_only", [](Instance& in) {
                     const Mat X = in.Xc, W0 = in.W;
                     return w_case(W0, linear_pca_grad(X, W0, LinearVariant::encoder_only).dW,
                                   [X, W0](const Mat& W) { return 0.5 * mean_sq(X * W * W0.transpose() - X); });
                 }});
    s.push_back({"linear_pca", "weighted_subspace_v2", [](Instance& in) {
                     const Mat X = in.Xc, W0 = in.W;
                     const WeightingSpec l = WeightingSpec::linear_spaced(kK);
                     const Vec sl = l.lambdas.cwiseSqrt();
                     return w_case(W0, weighted_subspace_grad(X, W0, l, WeightedVariant::v2).dW,
                                   [X, W0, sl](const Mat& W) {
                                       return 0.5 * (mean_sq(X * W0 * W.transpose() - X) -
                                                     mean_sq(X * W * sl.asDiagonal()) + mean_sq(X * W));
                                   });
                 }});
    s.push_back({"linear_pca", "asymmetric_loss", [](Instance& in) {
                     const Mat X = in.Xc, W0 = in.W;
                     const WeightingSpec l = WeightingSpec::linear_spaced(kK);
                     const Vec sl = l.lambdas.cwiseSqrt();
                     const Vec sh = batch_moments(Mat(X * W0)).var.cwiseSqrt();
                     return w_case(W0, asymmetric_pca_loss_grad(X, W0, l, sh).dW,
                                   [X, W0, sl, sh](const Mat& W) {
                                       const Mat WS = W * sh.asDiagonal();
                                       return 0.5 * (mean_sq(X * W0 * W.transpose() - X) +
                                                     (WS * sl.asDiagonal()).squaredNorm() - WS.squaredNorm() -
                                                     mean_sq(X * W * sl.asDiagonal()) + mean_sq(X * W));
                                   });
                 }});
    s.push_back({"linear_pca", "gha_plain", [](Instance& in) {
                     // -1/2 E||xW||² + sum W ⊙ [W upper(yᵀy)]_sg
                     const Mat X = in.Xc, W0 = in.W;
                     const Mat T = W0 * upper_yty(X, W0, false);
                     return w_case(W0, gha_grad(X, W0, GhaVariant::plain).dW, [X, T](const Mat& W) {
                         return -0.5 * mean_sq(X * W) + W.cwiseProduct(T).sum();
                     });
                 }});
    s.push_back({"linear_pca", "gha_plus_subspace", [](Instance& in) {
                     const Mat X = in.Xc, W0 = in.W;
                     const Mat T = W0 * upper_yty(X, W0, true);
                     return w_case(W0, gha_grad(X, W0, GhaVariant::plus_subspace).dW, [X, W0, T](const Mat& W) {
                         return 0.5 * mean_sq(X * W0 * W.transpose() - X) + W.cwiseProduct(T).sum();
                     });
                 }});
    s.push_back({"linear_pca", "gha_recon_combo", [](Instance& in) {
                     const Mat X = in.Xc, W0 = in.W;
                     const Mat T = W0 * upper_yty(X, W0, true);
                     return w_case(W0, gha_grad(X, W0, GhaVariant::recon_combo).dW, [X, T](const Mat& W) {
                         return 0.5 * mean_sq(X * W * W.transpose() - X) + W.cwiseProduct(T).sum();
                     });
                 }});
    s.push_back({"linear_pca", "nested_dropout", [](Instance& in) {
                     const Mat X = in.Xc, W0 = in.W;
                     const GradResult g = nested_dropout(X, W0, 0.6, in.rng);
                     const int cut = g.cuts.front();
                     return w_case(W0, g.dW, [X, cut](const Mat& W) {
                         Mat Y = X * W;
                         Y.rightCols(W.cols() - cut).setZero();
                         return 0.5 * mean_sq(Y * W.transpose() - X);
                     });
                 }});
    for (const double alpha : {1.0, -1.0}) {
        s.push_back({"linear_pca", alpha > 0 ? "weighted_variance_fixed_max" : "weighted_variance_fixed_min",
                     [alpha](Instance& in) {
                         const Mat X = in.Xc, W0 = in.W;
                         const WeightingSpec l = WeightingSpec::linear_spaced(kK);
                         const Vec sl = l.lambdas.cwiseSqrt();
                         const GradResult g =
                             weighted_variance_grad(X, W0, l, alpha, VarianceWeighting::fixed);
                         return w_case(W0, g.dW, [X, sl, alpha](const Mat& W) {
                             return 0.5 * (mean_sq(X * W * W.transpose() - X) - alpha * mean_sq(X * W * sl.asDiagonal()));
                         });
                     }});
    }
    s.push_back({"linear_pca", "weighted_variance_proportional", [](Instance& in) {
                     const Mat X = in.Xc, W0 = in.W;
                     const Vec e2 = (X * W0).array().square().colwise().mean().transpose();
                     const Vec sl = (e2 / e2.maxCoeff()).cwiseSqrt();
                     const GradResult g = weighted_variance_grad(X, W0, WeightingSpec{}, 1.0,
                                                                 VarianceWeighting::variance_proportional);
                     return w_case(W0, g.dW, [X, sl](const Mat& W) {
                         return 0.5 * (mean_sq(X * W * W.transpose() - X) - mean_sq(X * W * sl.asDiagonal()));
                     });
                 }});
    s.push_back({"linear_pca", "weighted_variance_stochastic", [](Instance& in) {
                     const Mat X = in.Xc, W0 = in.W;
                     const GradResult g = weighted_variance_grad(X, W0, WeightingSpec{}, 1.0,
                                                                 VarianceWeighting::stochastic, 0.6, &in.rng);
                     Mat M = Mat::Zero(X.rows(), kK);
                     for (Index n = 0; n < X.rows(); ++n)
                         M.row(n).head(g.cuts[std::size_t(n)]).setOnes();
                     return w_case(W0, g.dW, [X, M](const Mat& W) {
                         return 0.5 * (mean_sq(X * W * W.transpose() - X) - mean_sq((X * W).cwiseProduct(M)));
                     });
                 }});
    return s;
}

// ---- σ-PCA ----------------------------------------------------------------

SigmaPcaModel base_model(const Mat& W, const NonlinearitySpec& h)
{
    SigmaPcaModel m;
    m.W = W;
    m.nonlinearity = h;
    return m;
}

// 1/2 E||h((x - μ) We P Σ⁻¹) Σ Wdᵀ - (x - μ)||², everything but the named
// arguments frozen by the caller.
double sigma_loss(const Mat& xc, const Mat& We, const Mat& Wd, const Vec& sigma, const NonlinearitySpec& h,
                  const Mat& P)
{
    const Mat z = xc * We * P * sigma.cwiseInverse().asDiagonal();
    return 0.5 * mean_sq(hval(h, z) * sigma.asDiagonal() * Wd.transpose() - xc);
}

Spec sigma_decoder_spec(const std::string& name, DecoderMode mode, NonlinearitySpec h, MuMode mu = MuMode::precentred)
{
    return {"sigma_pca", name, [=](Instance& in) {
                SigmaPcaModel m = base_model(in.W, h);
                m.decoder_mode = mode;
                m.mu_mode = mu;
                const Mat X = mu == MuMode::precentred ? in.Xc : in.X;
                const Mat xc = mu == MuMode::precentred ? in.Xc : centred(in.X);
                const Mat W0 = in.W;
                const Mat I = Mat::Identity(kK, kK);
                const GradResult g = sigma_pca_grad(m, X);
                const Vec s0 = mode == DecoderMode::conventional ? Vec::Ones(kK) : frozen_sigma(xc * W0);
                switch (mode) {
                case DecoderMode::stopgrad:
                    return w_case(W0, g.dW, [=](const Mat& W) { return sigma_loss(xc, W, W0, s0, h, I); });
                case DecoderMode::rescaled: {
                    const double s = s0.cwiseAbs().maxCoeff();
                    return w_case(W0, g.dW, [=](const Mat& W) {
                        return sigma_loss(xc, W, W0, s0, h, I) + sigma_loss(xc, W0, W, s0, h, I) / s;
                    });
                }
                default:
                    return w_case(W0, g.dW, [=](const Mat& W) { return sigma_loss(xc, W, W, s0, h, I); });
                }
            }};
}

std::vector<Spec> sigma_specs()
{
    std::vector<Spec> s;
    s.push_back(sigma_decoder_spec("stopgrad_tanh4", DecoderMode::stopgrad, NonlinearitySpec::scaled_tanh(4.0)));
    s.push_back(sigma_decoder_spec("stopgrad_tanh0.8", DecoderMode::stopgrad, NonlinearitySpec::scaled_tanh(0.8)));
    s.push_back(sigma_decoder_spec("stopgrad_hard_tanh", DecoderMode::stopgrad, NonlinearitySpec::hard_tanh(1.0)));
    s.push_back(sigma_decoder_spec("stopgrad_linear", DecoderMode::stopgrad, NonlinearitySpec::linear()));
    s.push_back(sigma_decoder_spec("stopgrad_batch_mean", DecoderMode::stopgrad, NonlinearitySpec::scaled_tanh(2.0),
                                   MuMode::batch));
    s.push_back(sigma_decoder_spec("full_decoder", DecoderMode::full, NonlinearitySpec::scaled_tanh(2.0)));
    s.push_back(sigma_decoder_spec("rescaled_decoder", DecoderMode::rescaled, NonlinearitySpec::scaled_tanh(2.0)));
    s.push_back(sigma_decoder_spec("conventional", DecoderMode::conventional, NonlinearitySpec::scaled_tanh(1.0)));

    s.push_back({"sigma_pca", "trainable_sigma", [](Instance& in) {
                     // θ = [vec(W); σ]; the decoder weight stays frozen.
                     const NonlinearitySpec h = NonlinearitySpec::scaled_tanh(2.0);
                     SigmaPcaModel m = base_model(in.W, h);
                     m.sigma_mode = SigmaMode::trainable;
                     m.sigma = Vec::LinSpaced(kK, 0.7, 1.6);
                     m.sigma_l2 = 0.05;
                     const GradResult g = sigma_pca_grad(m, in.Xc);
                     const Mat xc = in.Xc, W0 = in.W;
                     const double l2 = m.sigma_l2;
                     const Index nw = W0.size();
                     Case c;
                     c.theta.resize(nw + kK);
                     c.theta << flatten(W0), m.sigma;
                     c.analytic.resize(nw + kK);
                     c.analytic << flatten(g.dW), g.dsigma;
                     c.loss = [=](const Vec& t) {
                         const Mat W = unflatten(t.head(nw), kP, kK);
                         const Vec sg = t.tail(kK);
                         return sigma_loss(xc, W, W0, sg, h, Mat::Identity(kK, kK)) + l2 * sg.squaredNorm();
                     };
                     return c;
                 }});
    s.push_back({"sigma_pca", "projective_deflation", [](Instance& in) {
                     const NonlinearitySpec h = NonlinearitySpec::scaled_tanh(2.0);
                     SigmaPcaModel m = base_model(in.W, h);
                     m.ordering = Ordering::projective_deflation;
                     const GradResult g = sigma_pca_grad(m, in.Xc);
                     const Mat xc = in.Xc, W0 = in.W;
                     const Mat I = Mat::Identity(kK, kK);
                     // P(W) = I - strict_upper(Wᵀ[W]_sg); σ frozen on the deflated outputs.
                     const Vec s0 = frozen_sigma(xc * W0 * (I - strict_upper(W0.transpose() * W0)));
                     return w_case(W0, g.dW, [=](const Mat& W) {
                         return sigma_loss(xc, W, W0, s0, h, I - strict_upper(W.transpose() * W0));
                     });
                 }});
    s.push_back({"sigma_pca", "nested", [](Instance& in) {
                     const NonlinearitySpec h = NonlinearitySpec::scaled_tanh(2.0);
                     SigmaPcaModel m = base_model(in.W, h);
                     m.ordering = Ordering::nested;
                     m.nested_rho = 0.6;
                     m.nested_orth = 0.5;
                     const GradResult g = sigma_pca_grad(m, in.Xc, &in.rng);
                     const int cut = g.cuts.front();
                     const Mat xc = in.Xc, W0 = in.W;
                     const Vec s0 = frozen_sigma(xc * W0);
                     const double c = m.nested_orth;
                     return w_case(W0, g.dW, [=](const Mat& W) {
                         Mat hz = hval(h, xc * W * s0.cwiseInverse().asDiagonal());
                         hz.rightCols(kK - cut).setZero();
                         const Mat E = W.transpose() * W - Mat::Identity(kK, kK);
                         return 0.5 * mean_sq(hz * s0.asDiagonal() * W0.transpose() - xc) + 0.5 * c * E.squaredNorm();
                     });
                 }});
    s.push_back({"sigma_pca", "compensation", [](Instance& in) {
                     const NonlinearitySpec h = NonlinearitySpec::scaled_tanh(2.0);
                     SigmaPcaModel m = base_model(in.W, h);
                     m.compensation = 0.7;
                     const GradResult g = sigma_pca_grad(m, in.Xc);
                     const Mat xc = in.Xc, W0 = in.W;
                     const Vec s0 = frozen_sigma(xc * W0);
                     return w_case(W0, g.dW, [=](const Mat& W) {
                         return sigma_loss(xc, W, W0, s0, h, Mat::Identity(kK, kK)) +
                                0.5 * 0.7 * mean_sq(xc * W * W0.transpose() - xc);
                     });
                 }});
    const std::pair<LatentVariant, std::string> latent[] = {{LatentVariant::wtw_symreg, "latent_wtw_symreg"},
                                                            {LatentVariant::tri_wtw_symreg, "latent_tri_wtw_symreg"},
                                                            {LatentVariant::plain_orthreg, "latent_plain_orthreg"},
                                                            {LatentVariant::plus_linear, "latent_plus_linear"}};
    for (const auto& [variant, name] : latent) {
        s.push_back({"sigma_pca", name, [variant](Instance& in) {
                         const NonlinearitySpec h = NonlinearitySpec::scaled_tanh(2.0);
                         const double beta = 0.8;
                         const GradResult g = latent_recon_grad(base_model(in.W, h), in.Xc, variant, beta);
                         const Mat xc = in.Xc, W0 = in.W;
                         const Vec s0 = frozen_sigma(xc * W0);
                         const Mat I = Mat::Identity(kK, kK);
                         Mat K = I;
                         if (variant == LatentVariant::wtw_symreg)
                             K = W0.transpose() * W0;
                         else if (variant == LatentVariant::tri_wtw_symreg)
                             K = lower(Mat(W0.transpose() * W0));
                         return w_case(W0, g.dW, [=](const Mat& W) {
                             const Mat hz = hval(h, xc * W * s0.cwiseInverse().asDiagonal());
                             double L = mean_sq(xc * W0 - hz * s0.asDiagonal() * K);
                             if (variant == LatentVariant::plus_linear)
                                 L += mean_sq(xc * W * W0.transpose() - xc);
                             else
                                 L += beta * (I - W.transpose() * W).squaredNorm();
                             return L;
                         });
                     }});
    }
    for (const auto& [penalty, adaptive, name] :
         {std::tuple{RicaPenalty::l1, true, "rica_l1_adaptive"}, std::tuple{RicaPenalty::logcosh, false, "rica_logcosh"}}) {
        s.push_back({"sigma_pca", name, [penalty, adaptive](Instance& in) {
                         RicaSpec spec;
                         spec.penalty = penalty;
                         spec.adaptive = adaptive;
                         spec.beta = 0.3;
                         const GradResult g = rica_grad(in.Xc, in.W, spec);
                         const Mat X = in.Xc, W0 = in.W;
                         const double beta = adaptive ? 0.3 * X.rowwise().norm().mean() : 0.3;
                         return w_case(W0, g.dW, [=](const Mat& W) {
                             const Mat Y = X * W;
                             const double pen = penalty == RicaPenalty::l1
                                                    ? Y.cwiseAbs().sum()
                                                    : Y.array().cosh().log().sum();
                             return 0.5 * mean_sq(X * W0 * W.transpose() - X) + beta * pen / double(X.rows());
                         });
                     }});
    }
    for (const auto& [form, mode, name] :
         {std::tuple{SkewForm::dediag, SkewBeta::constant, "skew_dediag"},
          std::tuple{SkewForm::skew, SkewBeta::sigma_comp, "skew_sigma_comp"}}) {
        s.push_back({"sigma_pca", name, [form, mode](Instance& in) {
                         const NonlinearitySpec h = NonlinearitySpec::scaled_tanh(1.0);
                         const GradResult g = skew_symmetric_grad(in.Xc, in.W, h, mode, form, 0.4);
                         // The skew term enters the loss as a frozen linear addition.
                         const Mat X = in.Xc, W0 = in.W;
                         const Mat Y = X * W0;
                         const double b = double(X.rows());
                         Vec sg = Vec::Ones(kK);
                         double coef = 0.4;
                         if (mode == SkewBeta::sigma_comp) {
                             sg = frozen_sigma(Y);
                             coef = 1.0;
                         }
                         const Mat H = hval(h, Y * sg.cwiseInverse().asDiagonal());
                         Mat M = Y.transpose() * H / b;
                         if (form == SkewForm::dediag)
                             M.diagonal() -= Y.cwiseProduct(H).colwise().sum().transpose() / b;
                         else
                             M -= H.transpose() * Y / b;
                         const Mat T = coef * W0 * M * sg.asDiagonal();
                         return w_case(W0, g.dW, [=](const Mat& W) {
                             return 0.5 * mean_sq(X * W0 * W.transpose() - X) + W.cwiseProduct(T).sum();
                         });
                     }});
    }
    for (const auto& [variant, name] :
         {std::pair{NoncentredVariant::wrap, "noncentred_wrap"}, std::pair{NoncentredVariant::bound, "noncentred_bound"}}) {
        s.push_back({"sigma_pca", name, [variant](Instance& in) {
                         const NonlinearitySpec h = NonlinearitySpec::scaled_tanh(2.0);
                         SigmaPcaModel m = base_model(in.W, h);
                         m.mu_mode = MuMode::batch;
                         const GradResult g = noncentred_grad(m, in.X, variant);
                         const Mat X = in.X, W0 = in.W;
                         const Vec mu_x = column_means(X);
                         const Vec mu_y = column_means(Mat(X * W0));
                         const Vec s0 = frozen_sigma(X * W0);
                         return w_case(W0, g.dW, [=](const Mat& W) {
                             const Mat yc = (X * W).rowwise() - mu_y.transpose();
                             Mat rec = hval(h, yc * s0.cwiseInverse().asDiagonal()) * s0.asDiagonal();
                             if (variant == NoncentredVariant::wrap)
                                 return 0.5 * mean_sq((rec.rowwise() + mu_y.transpose()) * W0.transpose() - X);
                             const Mat xc = X.rowwise() - mu_x.transpose();
                             const Mat m = mu_x.transpose();
                             return 0.5 * mean_sq(rec * W0.transpose() - xc) + 0.5 * mean_sq(m * W * W.transpose() - m);
                         });
                     }});
    }
    return s;
}

// ---- linear ICA -----------------------------------------------------------

std::vector<Spec> ica_specs()
{
    std::vector<Spec> s;
    s.push_back({"ica", "nlpca_rotation", [](Instance& in) {
                     const NonlinearitySpec h = NonlinearitySpec::scaled_tanh(1.0);
                     const Mat U = in.Xc.leftCols(kK);
                     const Mat V0 = in.W.topRows(kK) * std::sqrt(double(kP) / double(kK));
                     return w_case(V0, nlpca_rotation_grad(U, V0, h).dW, [=](const Mat& V) {
                         return 0.5 * mean_sq(hval(h, U * V) * V.transpose() - U);
                     });
                 }});
    s.push_back({"ica", "two_layer_second", [](Instance& in) {
                     TwoLayerState st;
                     st.first = base_model(in.W, NonlinearitySpec::scaled_tanh(2.0));
                     st.V = random_semi_orthogonal<double>(kK, kK, in.rng) + 0.1 * randn<double>(kK, kK, in.rng);
                     st.second = NonlinearitySpec::scaled_tanh(1.0);
                     const TwoLayerGrad g = two_layer_nlpca_grad(st, in.Xc);
                     const Mat xc = in.Xc, W0 = in.W;
                     const Mat u = xc * W0 * frozen_sigma(xc * W0).cwiseInverse().asDiagonal();
                     const NonlinearitySpec h2 = st.second;
                     return w_case(st.V, g.second.dW, [=](const Mat& V) {
                         return 0.5 * mean_sq(hval(h2, u * V) * V.transpose() - u);
                     });
                 }});
    s.push_back({"ica", "two_layer_first", [](Instance& in) {
                     TwoLayerState st;
                     const NonlinearitySpec h = NonlinearitySpec::scaled_tanh(2.0);
                     st.first = base_model(in.W, h);
                     st.V = Mat::Identity(kK, kK);
                     const TwoLayerGrad g = two_layer_nlpca_grad(st, in.Xc);
                     const Mat xc = in.Xc, W0 = in.W;
                     const Vec s0 = frozen_sigma(xc * W0);
                     return w_case(W0, g.first.dW, [=](const Mat& W) {
                         return sigma_loss(xc, W, W0, s0, h, Mat::Identity(kK, kK));
                     });
                 }});
    return s;
}

// ---- constraint regularisers ----------------------------------------------

std::vector<Spec> constraint_specs()
{
    std::vector<Spec> s;
    s.push_back({"constraints", "symmetric_orth_reg", [](Instance& in) {
                     const Mat W0 = in.W;
                     return w_case(W0, orth_reg_grad(W0, OrthSymmetric{0.3}), [](const Mat& W) {
                         return 0.3 * (Mat::Identity(kK, kK) - W.transpose() * W).squaredNorm();
                     });
                 }});
    s.push_back({"constraints", "asymmetric_orth_reg", [](Instance& in) {
                     const Mat W0 = in.W;
                     return w_case(W0, orth_reg_grad(W0, OrthAsymmetric{0.7}), [W0](const Mat& W) {
                         return 0.35 * strict_upper(Mat(W0.transpose() * W)).squaredNorm();
                     });
                 }});
    s.push_back({"constraints", "asymmetric_sigma_orth_reg", [](Instance& in) {
                     const Mat W0 = in.W;
                     const Vec sh = Vec::LinSpaced(kK, 2.0, 0.5);
                     return w_case(W0, orth_reg_grad(W0, OrthAsymmetricSigma{0.7, sh}), [W0, sh](const Mat& W) {
                         return 0.35 * strict_upper(Mat(sh.asDiagonal() * W0.transpose() * W)).squaredNorm();
                     });
                 }});
    s.push_back({"constraints", "unit_norm_reg", [](Instance& in) {
                     const Mat W0 = in.W;
                     return w_case(W0, unit_norm_reg_grad(W0, 0.9), [](const Mat& W) {
                         return 0.45 * (Vec::Ones(W.cols()) - W.colwise().norm().transpose()).squaredNorm();
                     });
                 }});
    return s;
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(const GradSuiteOptions& options)
{
    require(options.instances >= 1, "gradient suite: need at least one instance");
    std::vector<Spec> specs = linear_specs();
    for (auto* more : {&sigma_specs, &ica_specs, &constraint_specs}) {
        std::vector<Spec> s = (*more)();
        specs.insert(specs.end(), s.begin(), s.end());
    }
    std::vector<GradSuiteEntry> out;
    Rng rng(options.seed);
    for (const Spec& spec : specs) {
        GradSuiteEntry e{spec.module, spec.op, options.instances, 0.0, true};
        for (int i = 0; i < options.instances; ++i) {
            Instance in = make_instance(rng);
            const Case c = spec.make(in);
            const GradCheckReport r = grad_check(c.loss, c.theta, c.analytic, options.h, options.tol);
            e.max_rel_error = std::max(e.max_rel_error, r.max_rel_error);
            e.passed = e.passed && r.passed;
        }
        out.push_back(e);
    }
    return out;
}

}  // namespace spca
