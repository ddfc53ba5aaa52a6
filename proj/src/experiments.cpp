#include "spca/experiments.hpp"

#include <map>

namespace spca {

namespace {

template <typename E>
std::string enum_name(const std::map<E, std::string>& names, E value)
{
    const auto it = names.find(value);
    return it == names.end() ? "unknown" : it->second;
}

template <typename E>
E enum_parse(const std::map<E, std::string>& names, const std::string& text, const std::string& what)
{
    std::string known;
    for (const auto& [value, name] : names) {
        if (name == text)
            return value;
        known += (known.empty() ? "" : ", ") + name;
    }
    throw std::invalid_argument("unknown " + what + " '" + text + "' (expected one of: " + known + ")");
}

const std::map<SeparationMethod, std::string> kSeparationNames = {
    {SeparationMethod::linear_pca, "pca"},      {SeparationMethod::sigma_pca, "nlpca"},
    {SeparationMethod::fastica, "fastica"},     {SeparationMethod::two_stage, "two_stage"},
    {SeparationMethod::two_layer, "two_layer"}, {SeparationMethod::easi, "easi"},
};

const std::map<SignalScenario, std::string> kScenarioNames = {
    {SignalScenario::orthogonal_equal, "orthogonal"},
    {SignalScenario::orthogonal_distinct, "orthogonal-distinct"},
    {SignalScenario::non_orthogonal, "non-orthogonal"},
};

const std::map<PointDist, std::string> kDistNames = {
    {PointDist::uniform, "uniform"}, {PointDist::laplace, "laplace"}, {PointDist::gaussian, "gaussian"}};

const std::map<PatchMethod, std::string> kPatchNames = {
    {PatchMethod::sigma_pca, "nlpca"},
    {PatchMethod::sigma_pca_full_decoder, "nlpca-full-decoder"},
    {PatchMethod::linear_symmetric, "linear-symmetric"},
    {PatchMethod::conventional, "conventional"},
    {PatchMethod::svd, "svd"},
    {PatchMethod::fastica, "fastica"},
    {PatchMethod::rica, "rica"},
};

// Reorders columns of W by descending std of (X - mean) W.
void sort_by_std(Mat& W, Vec& sigma, const Mat& Xc)
{
    const Vec s = batch_moments(Mat(Xc * W)).var.cwiseSqrt();
    const std::vector<Index> order = descending_order(s);
    Mat Ws(W.rows(), W.cols());
    sigma.resize(W.cols());
    for (std::size_t j = 0; j < order.size(); ++j) {
        Ws.col(Index(j)) = W.col(order[j]);
        sigma(Index(j)) = s(order[j]);
    }
    W = std::move(Ws);
}

SigmaPcaModel sigma_model(double a, DecoderMode mode)
{
    SigmaPcaModel m;
    m.nonlinearity = NonlinearitySpec::scaled_tanh(a);
    m.sigma_mode = SigmaMode::batch;
    m.mu_mode = MuMode::precentred;
    m.decoder_mode = mode;
    return m;
}

}  // namespace

std::string to_string(SeparationMethod m) { return enum_name(kSeparationNames, m); }
SeparationMethod separation_method_from_string(const std::string& s)
{
    return enum_parse(kSeparationNames, s, "method");
}
std::string to_string(SignalScenario s) { return enum_name(kScenarioNames, s); }
SignalScenario signal_scenario_from_string(const std::string& s) { return enum_parse(kScenarioNames, s, "mixing"); }
std::string to_string(PointDist d) { return enum_name(kDistNames, d); }
PointDist point_dist_from_string(const std::string& s) { return enum_parse(kDistNames, s, "distribution"); }
std::string to_string(PatchMethod m) { return enum_name(kPatchNames, m); }
PatchMethod patch_method_from_string(const std::string& s) { return enum_parse(kPatchNames, s, "patch method"); }

SeparationResult separate(const Mat& X, Index k, const SeparationOptions& options)
{
    SeparationResult r;
    r.mean = column_means(X);
    const Mat Xc = X.rowwise() - r.mean.transpose();
    const TrainConfig config = options.train ? *options.train : default_signal_config(options.epochs, options.seed);
    const NonlinearitySpec h = NonlinearitySpec::scaled_tanh(options.a);

    switch (options.method) {
    case SeparationMethod::linear_pca:
        r.W = pca_fit_svd<double>(X, k).W;
        r.B = r.W;
        break;
    case SeparationMethod::sigma_pca: {
        const SigmaPcaFit fit = fit_sigma_pca(Xc, k, sigma_model(options.a, DecoderMode::stopgrad), config);
        r.W = fit.model.W;
        r.B = r.W;
        r.history = fit.train.history;
        break;
    }
    case SeparationMethod::fastica:
    case SeparationMethod::two_stage: {
        TwoStageOptions o;
        o.seed = options.seed;
        if (options.method == SeparationMethod::two_stage) {
            o.rotation = RotationMethod::conventional_nlpca;
            o.nlpca.nonlinearity = h;
            o.nlpca.epochs = options.epochs;
            o.nlpca.lr = config.optimizer.lr;
            o.nlpca.momentum = config.optimizer.momentum;
            o.nlpca.batch_size = config.batch_size;
        }
        const IcaResult ica = two_stage_ica(X, k, o);
        r.B = ica.B;
        r.W = ica.B_unit;
        break;
    }
    case SeparationMethod::two_layer: {
        TwoLayerOptions o;
        o.first = sigma_model(options.a, DecoderMode::stopgrad);
        o.first_config = config;
        o.second = h;
        o.second_config = default_rotation_config(options.epochs, options.seed);
        const IcaResult ica = two_layer_fit(X, k, o);
        r.B = ica.B;
        r.W = ica.B_unit;
        break;
    }
    case SeparationMethod::easi: {
        EasiOptions o;
        o.h = h;
        o.seed = options.seed;
        o.epochs = options.epochs;
        const IcaResult ica = easi_fit(X, k, o);
        r.B = ica.B;
        r.W = ica.B_unit;
        break;
    }
    }
    r.Y = Xc * r.B;
    r.sigma = batch_moments(r.Y).var.cwiseSqrt();
    return r;
}

SignalRun run_signals(const SignalRunOptions& options)
{
    SignalRun run;
    run.data = signal_experiment(options.scenario, options.data_seed, options.n, options.noise_fraction);
    run.fit = separate(run.data.X, 3, options.separation);
    run.match = match_components(run.fit.Y, run.data.truth.S0);
    run.variance_errors = variance_errors(run.fit.Y, run.data.truth.S0, run.match);
    run.amari = amari_index(run.fit.B, run.data.truth.B0_inv);
    run.orth_residual = orth_residual(run.fit.W);
    run.success = run.match.min_corr() >= 0.9;
    return run;
}

PointsRun run_points2d(const PointsRunOptions& options)
{
    PointsRun run;
    auto [X, truth] = gen_points_2d(options.dist, options.n, options.theta, options.data_seed);
    run.X = std::move(X);
    run.truth = std::move(truth);
    run.fit = separate(run.X, 2, options.separation);
    run.angle_error_deg = angle_error(run.fit.W, options.theta) * 180.0 / 3.14159265358979323846;
    return run;
}

PatchRun run_patches(const PatchRunOptions& options, const std::vector<Image>* images)
{
    std::vector<Image> corpus;
    if (!images) {
        corpus = gen_bars_corpus(options.images, options.image_size, options.image_size, options.seed);
        images = &corpus;
    }
    require(!images->empty(), "run_patches: no images");
    const DataMatrix<double> patches = extract_patches(*images, options.patch, options.stride, options.zero_pad);
    PatchRun run;
    run.patch = options.patch;
    run.channels = images->front().channels;
    const Vec mean = column_means(patches.values());
    run.data_mean = mean.transpose();
    const Mat Xc = patches.values().rowwise() - mean.transpose();
    const TrainConfig config = options.train ? *options.train : default_patch_config(options.epochs, options.seed);
    const Index k = options.k;

    switch (options.method) {
    case PatchMethod::sigma_pca:
    case PatchMethod::sigma_pca_full_decoder:
    case PatchMethod::conventional: {
        const DecoderMode mode = options.method == PatchMethod::sigma_pca ? DecoderMode::stopgrad
                                 : options.method == PatchMethod::conventional ? DecoderMode::conventional
                                                                               : DecoderMode::full;
        const SigmaPcaFit fit = fit_sigma_pca(Xc, k, sigma_model(options.a, mode), config);
        run.W = fit.model.W;
        run.history = fit.train.history;
        break;
    }
    case PatchMethod::linear_symmetric: {
        LinearRule rule;
        rule.family = LinearRule::Family::linear;
        rule.linear = LinearVariant::tied_full;
        const LinearFit fit = fit_linear(Xc, k, rule, config);
        run.W = fit.W;
        run.history = fit.train.history;
        break;
    }
    case PatchMethod::svd:
        run.W = pca_fit_svd<double>(Xc, k).W;
        break;
    case PatchMethod::fastica: {
        TwoStageOptions o;
        o.seed = options.seed;
        run.W = two_stage_ica(Xc, k, o).B_unit;
        break;
    }
    case PatchMethod::rica: {
        const Mat W0 = random_semi_orthogonal<double>(Xc.cols(), k, options.seed ^ 0x9e3779b97f4a7c15ULL);
        const TrainResult t = train(rica_method(options.rica), DataMatrix<double>(Xc), Params{W0, Vec()}, config);
        run.W = t.params.W;
        run.history = t.history;
        break;
    }
    }
    sort_by_std(run.W, run.sigma, Xc);
    return run;
}

}  // namespace spca
