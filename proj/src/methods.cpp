#include "spca/methods.hpp"

#include <cmath>

namespace spca {

namespace {

WeightingSpec lambdas_for(const LinearRule& rule, Index k)
{
    if (rule.lambdas.lambdas.size() == 0)
        return WeightingSpec::linear_spaced(k);
    require(rule.lambdas.lambdas.size() == k, "linear_method: lambdas need k values");
    return rule.lambdas;
}

// Full-data evaluation: running statistics are replaced by full-data estimates.
SigmaPcaModel evaluation_model(const SigmaPcaModel& base, const Params& p)
{
    SigmaPcaModel m = base;
    m.W = p.W;
    if (m.sigma_mode == SigmaMode::trainable)
        m.sigma = p.sigma;
    else
        m.sigma_mode = SigmaMode::batch;
    if (m.mu_mode == MuMode::ema)
        m.mu_mode = MuMode::batch;
    return m;
}

}  // namespace

namespace {

struct NamedRule {
    std::string name;
    LinearRule rule;
};

std::vector<NamedRule> build_named_rules()
{
    using F = LinearRule::Family;
    auto make = [](F family, auto&& tweak) {
        LinearRule r;
        r.family = family;
        tweak(r);
        return r;
    };
    return {
        {"tied", make(F::linear, [](LinearRule& r) { r.linear = LinearVariant::tied_full; })},
        {"subspace", make(F::linear, [](LinearRule& r) { r.linear = LinearVariant::subspace; })},
        {"encoder-only", make(F::linear, [](LinearRule& r) { r.linear = LinearVariant::encoder_only; })},
        {"weighted-v1", make(F::weighted_subspace, [](LinearRule& r) { r.weighted = WeightedVariant::v1; })},
        {"weighted-v2", make(F::weighted_subspace, [](LinearRule& r) { r.weighted = WeightedVariant::v2; })},
        {"weighted-v3", make(F::weighted_subspace, [](LinearRule& r) { r.weighted = WeightedVariant::v3; })},
        {"asymmetric", make(F::asymmetric_loss, [](LinearRule&) {})},
        {"gha", make(F::gha, [](LinearRule& r) { r.gha = GhaVariant::plain; })},
        {"gha-encoder", make(F::gha, [](LinearRule& r) { r.gha = GhaVariant::with_encoder; })},
        {"gha-subspace", make(F::gha, [](LinearRule& r) { r.gha = GhaVariant::plus_subspace; })},
        {"gha-recon", make(F::gha, [](LinearRule& r) { r.gha = GhaVariant::recon_combo; })},
        {"nested-dropout", make(F::nested_dropout, [](LinearRule&) {})},
        {"wvar-fixed", make(F::weighted_variance, [](LinearRule& r) { r.weighting = VarianceWeighting::fixed; })},
        {"wvar-stochastic",
         make(F::weighted_variance, [](LinearRule& r) { r.weighting = VarianceWeighting::stochastic; })},
        {"wvar-proportional",
         make(F::weighted_variance, [](LinearRule& r) { r.weighting = VarianceWeighting::variance_proportional; })},
    };
}

const std::vector<NamedRule>& named_rules()
{
    static const std::vector<NamedRule> rules = build_named_rules();
    return rules;
}

}  // namespace

const std::vector<std::string>& linear_rule_names()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const NamedRule& r : named_rules())
            out.push_back(r.name);
        return out;
    }();
    return names;
}

LinearRule linear_rule_from_string(const std::string& name)
{
    std::string known;
    for (const NamedRule& r : named_rules()) {
        if (r.name == name)
            return r.rule;
        known += (known.empty() ? "" : ", ") + r.name;
    }
    throw std::invalid_argument("unknown linear rule '" + name + "' (expected one of: " + known + ")");
}

Method linear_method(const LinearRule& rule)
{
    Method m;
    m.grad = [rule](const Params& p, const Mat& X, Rng& rng) -> GradResult {
        const Mat& W = p.W;
        switch (rule.family) {
        case LinearRule::Family::linear:
            return linear_pca_grad(X, W, rule.linear);
        case LinearRule::Family::weighted_subspace:
            return weighted_subspace_grad(X, W, lambdas_for(rule, W.cols()), rule.weighted);
        case LinearRule::Family::asymmetric_loss: {
            // Second moment, not the re-centred variance: the unit-norm fixed
            // point needs σ̂² = E(y²) exactly, and the data are centred.
            const Vec sigma_hat = (X * W).colwise().squaredNorm().transpose().cwiseSqrt() / std::sqrt(double(X.rows()));
            return asymmetric_pca_loss_grad(X, W, lambdas_for(rule, W.cols()), sigma_hat);
        }
        case LinearRule::Family::gha:
            return gha_grad(X, W, rule.gha);
        case LinearRule::Family::nested_dropout:
            return nested_dropout(X, W, rule.rho, rng);
        case LinearRule::Family::weighted_variance:
            return weighted_variance_grad(X, W, lambdas_for(rule, W.cols()), rule.alpha, rule.weighting, rule.rho,
                                          &rng);
        }
        throw std::invalid_argument("linear_method: unknown family");
    };
    m.evaluate = [](const Params& p, const Mat& X) { return 2.0 * tied_loss(X, p.W); };
    return m;
}

SigmaPcaBinding sigma_pca_method(const SigmaPcaModel& model)
{
    SigmaPcaBinding b;
    b.state = std::make_shared<SigmaPcaModel>(model);
    auto state = b.state;
    b.method.update_statistics = [state](const Params& p, const Mat& X) {
        state->W = p.W;
        update_statistics(*state, X);
    };
    b.method.grad = [state](const Params& p, const Mat& X, Rng& rng) {
        state->W = p.W;
        if (state->sigma_mode == SigmaMode::trainable)
            state->sigma = p.sigma;
        return sigma_pca_grad(*state, X, &rng);
    };
    b.method.evaluate = [state](const Params& p, const Mat& X) {
        return sigma_pca_recon_error(evaluation_model(*state, p), X);
    };
    return b;
}

Method latent_recon_method(const SigmaPcaModel& model, LatentVariant variant, double beta)
{
    Method m;
    m.grad = [model, variant, beta](const Params& p, const Mat& X, Rng&) {
        SigmaPcaModel cur = model;
        cur.W = p.W;
        return latent_recon_grad(cur, X, variant, beta);
    };
    m.evaluate = [model](const Params& p, const Mat& X) {
        return sigma_pca_recon_error(evaluation_model(model, p), X);
    };
    return m;
}

Method rica_method(const RicaSpec& spec)
{
    Method m;
    m.grad = [spec](const Params& p, const Mat& X, Rng&) { return rica_grad(X, p.W, spec); };
    m.evaluate = [spec](const Params& p, const Mat& X) { return rica_grad(X, p.W, spec).loss; };
    return m;
}

GradResult nlpca_rotation_grad(const Mat& U, const Mat& V, const NonlinearitySpec& h)
{
    require(U.cols() == V.rows(), "nlpca_rotation_grad: U has " + std::to_string(U.cols()) +
                                      " columns, V has " + std::to_string(V.rows()) + " rows");
    const double b = double(U.rows());
    const Activation a = nonlinearity_eval(h, Mat(U * V));
    const Mat r = a.h * V.transpose() - U;
    GradResult out;
    out.recon_error = r.squaredNorm() / b;
    out.loss = 0.5 * out.recon_error;
    out.dW = (U.transpose() * (r * V).cwiseProduct(a.dh) + r.transpose() * a.h) / b;
    return out;
}

Method nlpca_rotation_method(const NonlinearitySpec& h)
{
    Method m;
    m.grad = [h](const Params& p, const Mat& U, Rng&) { return nlpca_rotation_grad(U, p.W, h); };
    m.evaluate = [h](const Params& p, const Mat& U) { return nlpca_rotation_grad(U, p.W, h).recon_error; };
    return m;
}

SigmaPcaFit fit_sigma_pca(const Mat& X, Index k, SigmaPcaModel model, const TrainConfig& config)
{
    if (model.W.size() == 0)
        model.W = random_semi_orthogonal<double>(X.cols(), k, config.seed ^ 0x9e3779b97f4a7c15ULL);
    require(model.W.rows() == X.cols(), "fit_sigma_pca: W rows do not match data dimension");
    Params init{model.W, Vec()};
    if (model.sigma_mode == SigmaMode::trainable) {
        if (model.sigma.size() != model.k())
            model.sigma = Vec::Ones(model.k());
        init.sigma = model.sigma;
    }
    SigmaPcaBinding binding = sigma_pca_method(model);
    SigmaPcaFit fit;
    fit.train = train(binding.method, DataMatrix<double>(X), init, config);
    fit.model = *binding.state;
    fit.model.W = fit.train.params.W;
    if (model.sigma_mode == SigmaMode::trainable)
        fit.model.sigma = fit.train.params.sigma;
    else
        fit.model.sigma = estimate_sigma(fit.model, X);
    return fit;
}

LinearFit fit_linear(const Mat& X, Index k, const LinearRule& rule, const TrainConfig& config)
{
    LinearFit fit;
    fit.mean = column_means(X);
    const Mat Xc = centred(X);
    const Mat W0 = random_semi_orthogonal<double>(X.cols(), k, config.seed ^ 0x9e3779b97f4a7c15ULL);
    fit.train = train(linear_method(rule), DataMatrix<double>(Xc), Params{W0, Vec()}, config);
    fit.W = fit.train.params.W;
    return fit;
}

TrainConfig default_signal_config(int epochs, std::uint64_t seed)
{
    TrainConfig c;
    c.optimizer = OptimizerConfig::sgd(0.01, 0.9);
    c.batch_size = 100;
    c.epochs = epochs;
    c.seed = seed;
    c.constraints.unit_norm = ConstraintSpec::UnitNorm::project;
    return c;
}

TrainConfig default_patch_config(int epochs, std::uint64_t seed)
{
    TrainConfig c;
    c.optimizer = OptimizerConfig::adam(1e-3);
    c.batch_size = 128;
    c.epochs = epochs;
    c.seed = seed;
    c.constraints.unit_norm = ConstraintSpec::UnitNorm::project;
    return c;
}

TrainConfig default_linear_config(int epochs, std::uint64_t seed)
{
    TrainConfig c = default_signal_config(epochs, seed);
    c.optimizer.lr = 1e-3;
    c.constraints.unit_norm = ConstraintSpec::UnitNorm::none;
    c.checkpoint = CheckpointPolicy::last;
    return c;
}

TrainConfig default_rotation_config(int epochs, std::uint64_t seed)
{
    TrainConfig c = default_signal_config(epochs, seed);
    c.constraints.unit_norm = ConstraintSpec::UnitNorm::none;
    c.constraints.orthogonality = ConstraintSpec::Orthogonality::iterative;
    c.constraints.beta = 0.5;
    return c;
}

}  // namespace spca
