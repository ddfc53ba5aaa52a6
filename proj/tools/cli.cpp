#include "spca/cli.hpp"

#include "spca/experiments.hpp"
#include "spca/gradcheck.hpp"
#include "spca/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#ifndef SPCA_VERSION
#define SPCA_VERSION "0.0.0"
#endif

namespace spca {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kManifestSchema = 1;
constexpr const char* kMetricsSchema = "spca-metrics/1";
constexpr const char* kManifestName = "manifest.json";

// ---------------------------------------------------------------- commands

struct CommandInfo {
    std::string name;
    std::string help;
    std::vector<std::string> keys;
    std::string methods;  // help text for --method
};

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts)
{
    std::vector<std::string> out;
    for (const auto& p : parts)
        out.insert(out.end(), p.begin(), p.end());
    return out;
}

const std::vector<std::string> kTrainKeys = {
    "optimizer.kind",     "optimizer.lr",      "optimizer.momentum", "optimizer.beta1",
    "optimizer.beta2",    "optimizer.eps",     "train.batch_size",   "train.epochs",
    "train.seed",         "train.checkpoint",  "constraints.unit_norm", "constraints.unit_norm_strength",
    "constraints.orthogonality", "constraints.orth_alpha", "constraints.orth_beta",
    "constraints.sigma_weighted", "output.dir",
};

const std::vector<CommandInfo>& commands()
{
    static const std::vector<CommandInfo> table = {
        {"pca", "SVD or a linear PCA rule on generated 6-dim Gaussian data or a CSV file",
         concat({kTrainKeys, {"method.name", "method.k", "method.alpha", "method.rho", "data.input", "data.n",
                              "data.seed"}}),
         "svd, tied, subspace, encoder-only, weighted-v1, weighted-v2, weighted-v3, asymmetric, gha, gha-encoder, "
         "gha-subspace, gha-recon, nested-dropout, wvar-fixed, wvar-stochastic, wvar-proportional (default svd)"},
        {"nlpca", "sigma-PCA on a generated signal mixture or a CSV file",
         concat({kTrainKeys,
                 {"method.a", "method.k", "method.decoder_mode", "method.ordering", "method.triangular_variant",
                  "method.sigma_mode", "method.sigma_l2", "method.nonlinearity", "method.rho", "data.input",
                  "data.mixing", "data.n", "data.noise", "data.seed"}}),
         ""},
        {"ica", "linear ICA (fastica, two_stage, two_layer, easi) on a signal mixture or a CSV file",
         concat({kTrainKeys,
                 {"method.name", "method.a", "method.k", "data.input", "data.mixing", "data.n", "data.noise",
                  "data.seed"}}),
         "fastica, two_stage, two_layer, easi (default fastica)"},
        {"signals", "separate sine, square and sawtooth sources from a 3-channel mixture",
         concat({kTrainKeys, {"method.name", "method.a", "data.mixing", "data.n", "data.noise", "data.seed"}}),
         "pca, nlpca, fastica, two_stage, two_layer, easi (default nlpca)"},
        {"points2d", "recover the rotation of 2-D uniform, Laplace or Gaussian points",
         concat({kTrainKeys, {"method.name", "method.a", "data.dist", "data.theta", "data.n", "data.seed"}}),
         "pca, nlpca, fastica, two_stage, two_layer, easi (default nlpca)"},
        {"patches", "learn filters from image patches and write a PNG grid",
         concat({kTrainKeys,
                 {"method.name", "method.a", "method.k", "method.rica_beta", "method.rica_adaptive",
                  "method.rica_penalty", "data.images", "data.image_size", "data.patch", "data.stride",
                  "data.zero_pad", "data.image_dir", "data.seed", "output.tile_gap", "output.tile_scale",
                  "output.grid_columns"}}),
         "nlpca, nlpca-full-decoder, linear-symmetric, conventional, svd, fastica, rica (default nlpca)"},
        {"gradcheck", "finite-difference check of every gradient with a stated loss",
         {"train.seed", "gradcheck.instances", "gradcheck.tol", "output.dir"},
         ""},
    };
    return table;
}

const CommandInfo* find_command(const std::string& name)
{
    for (const CommandInfo& c : commands())
        if (c.name == name)
            return &c;
    return nullptr;
}

// ---------------------------------------------------------------- helpers

// Console only; files keep full precision.
std::string brief(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Mat& M)
{
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i)
        rows.push_back(to_json(Vec(M.row(i).transpose())));
    return rows;
}

json to_json(const MatchReport& m)
{
    json perm = json::array();
    for (Index p : m.perm)
        perm.push_back(p);
    return {{"perm", perm}, {"signs", m.signs}, {"corrs", to_json(m.corrs)}, {"min_corr", m.min_corr()}};
}

template <typename E>
E parse_enum(const std::string& key, const std::string& value, const std::vector<std::pair<std::string, E>>& names)
{
    std::string known;
    for (const auto& [name, e] : names) {
        if (name == value)
            return e;
        known += (known.empty() ? "" : ", ") + name;
    }
    throw ConfigError(key + ": '" + value + "' is not one of " + known);
}

template <typename E>
std::string enum_text(E value, const std::vector<std::pair<std::string, E>>& names)
{
    for (const auto& [name, e] : names)
        if (e == value)
            return name;
    return "unknown";
}

using Unit = ConstraintSpec::UnitNorm;
using Orth = ConstraintSpec::Orthogonality;

const std::vector<std::pair<std::string, OptimizerKind>> kOptimizers = {{"sgd", OptimizerKind::sgd},
                                                                         {"adam", OptimizerKind::adam}};
const std::vector<std::pair<std::string, CheckpointPolicy>> kCheckpoints = {{"best_loss", CheckpointPolicy::best_loss},
                                                                             {"last", CheckpointPolicy::last}};
const std::vector<std::pair<std::string, Unit>> kUnitNorms = {
    {"none", Unit::none}, {"project", Unit::project}, {"regularize", Unit::regularize},
    {"weight_norm", Unit::weight_norm}};
const std::vector<std::pair<std::string, Orth>> kOrths = {{"none", Orth::none},
                                                          {"symmetric_reg", Orth::symmetric_reg},
                                                          {"asymmetric_reg", Orth::asymmetric_reg},
                                                          {"iterative", Orth::iterative},
                                                          {"gram_schmidt", Orth::gram_schmidt}};
const std::vector<std::pair<std::string, DecoderMode>> kDecoders = {
    {"stopgrad", DecoderMode::stopgrad},           {"full", DecoderMode::full},
    {"rescaled", DecoderMode::rescaled},           {"sigma_dropped", DecoderMode::sigma_dropped},
    {"encoder_scaled", DecoderMode::encoder_scaled}, {"conventional", DecoderMode::conventional}};
const std::vector<std::pair<std::string, Ordering>> kOrderings = {
    {"none", Ordering::none},
    {"projective_deflation", Ordering::projective_deflation},
    {"triangular", Ordering::triangular},
    {"weighted_latent", Ordering::weighted_latent},
    {"nested", Ordering::nested}};
const std::vector<std::pair<std::string, SigmaMode>> kSigmaModes = {
    {"batch", SigmaMode::batch}, {"ema", SigmaMode::ema}, {"trainable", SigmaMode::trainable}};
const std::vector<std::pair<std::string, RicaPenalty>> kRicaPenalties = {{"l1", RicaPenalty::l1},
                                                                          {"logcosh", RicaPenalty::logcosh}};

long long bounded(const ConfigView& c, const std::string& key, long long fallback, long long lo,
                  long long hi = std::numeric_limits<long long>::max())
{
    const long long v = c.integer(key, fallback);
    if (v < lo || v > hi)
        throw ConfigError(key + ": " + std::to_string(v) + " is outside [" + std::to_string(lo) + ", " +
                          (hi == std::numeric_limits<long long>::max() ? "inf" : std::to_string(hi)) + "]");
    return v;
}

double positive(const ConfigView& c, const std::string& key, double fallback)
{
    const double v = c.number(key, fallback);
    if (!(v > 0.0))
        throw ConfigError(key + ": must be > 0, got " + format_double(v));
    return v;
}

TrainConfig resolve_train(const ConfigView& c, TrainConfig base)
{
    OptimizerConfig& o = base.optimizer;
    if (c.has("optimizer.kind"))
        o.kind = parse_enum("optimizer.kind", c.text("optimizer.kind", ""), kOptimizers);
    o.lr = c.number("optimizer.lr", o.lr);
    o.momentum = c.number("optimizer.momentum", o.momentum);
    o.beta1 = c.number("optimizer.beta1", o.beta1);
    o.beta2 = c.number("optimizer.beta2", o.beta2);
    o.eps = c.number("optimizer.eps", o.eps);
    base.batch_size = int(bounded(c, "train.batch_size", base.batch_size, 1, 1 << 30));
    base.epochs = int(bounded(c, "train.epochs", base.epochs, 0, 1 << 30));
    base.seed = std::uint64_t(bounded(c, "train.seed", (long long)base.seed, 0));
    if (c.has("train.checkpoint"))
        base.checkpoint = parse_enum("train.checkpoint", c.text("train.checkpoint", ""), kCheckpoints);
    ConstraintSpec& s = base.constraints;
    if (c.has("constraints.unit_norm"))
        s.unit_norm = parse_enum("constraints.unit_norm", c.text("constraints.unit_norm", ""), kUnitNorms);
    s.unit_norm_strength = c.number("constraints.unit_norm_strength", s.unit_norm_strength);
    if (c.has("constraints.orthogonality"))
        s.orthogonality = parse_enum("constraints.orthogonality", c.text("constraints.orthogonality", ""), kOrths);
    s.alpha = c.number("constraints.orth_alpha", s.alpha);
    s.beta = c.number("constraints.orth_beta", s.beta);
    s.sigma_weighted = c.boolean("constraints.sigma_weighted", s.sigma_weighted);
    try {
        base.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return base;
}

json to_json(const TrainConfig& t)
{
    const OptimizerConfig& o = t.optimizer;
    json opt = {{"kind", enum_text(o.kind, kOptimizers)}, {"lr", o.lr}};
    if (o.kind == OptimizerKind::sgd)
        opt["momentum"] = o.momentum;
    else
        opt.update({{"beta1", o.beta1}, {"beta2", o.beta2}, {"eps", o.eps}});
    const ConstraintSpec& s = t.constraints;
    return {{"optimizer", opt},
            {"batch_size", t.batch_size},
            {"epochs", t.epochs},
            {"seed", t.seed},
            {"checkpoint", enum_text(t.checkpoint, kCheckpoints)},
            {"constraints",
             {{"unit_norm", enum_text(s.unit_norm, kUnitNorms)},
              {"unit_norm_strength", s.unit_norm_strength},
              {"orthogonality", enum_text(s.orthogonality, kOrths)},
              {"orth_alpha", s.alpha},
              {"orth_beta", s.beta},
              {"sigma_weighted", s.sigma_weighted}}}};
}

std::string method_choice(const ConfigView& c, const std::string& fallback, const std::vector<std::string>& allowed)
{
    const std::string v = c.text("method.name", fallback);
    if (std::find(allowed.begin(), allowed.end(), v) != allowed.end())
        return v;
    std::string list;
    for (const std::string& a : allowed)
        list += (list.empty() ? "" : ", ") + a;
    throw ConfigError("method.name: '" + v + "' is not one of " + list);
}

std::string utc_timestamp(const char* format)
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[64];
    std::strftime(buf, sizeof buf, format, &tm);
    return buf;
}

fs::path choose_output_dir(const ConfigView& c, std::uint64_t seed)
{
    if (c.has("output.dir"))
        return fs::path(c.text("output.dir", ""));
    const char* env = std::getenv(kOutputRootEnv);
    const fs::path root = env && *env ? fs::path(env) : fs::path("runs");
    const std::string base = utc_timestamp("%Y%m%d-%H%M%S") + "-" + std::to_string(seed);
    fs::path dir = root / base;
    for (int i = 2; fs::exists(dir); ++i)
        dir = root / (base + "-" + std::to_string(i));
    return dir;
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
    if (!out)
        throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

// One run of one command: resolved settings in, files and metrics out.
struct RunContext {
    std::string command;
    ConfigView cfg;
    fs::path dir;
    std::ostream& out;
    std::uint64_t seed = 0;
    json effective = json::object();
    json metrics = json::object();
    std::vector<std::string> files;

    fs::path file(const std::string& name)
    {
        fs::create_directories(dir);
        if (std::find(files.begin(), files.end(), name) == files.end())
            files.push_back(name);
        return dir / name;
    }
};

void write_history(RunContext& ctx, const std::vector<EpochRecord>& history)
{
    Mat H(Index(history.size()), 4);
    for (std::size_t i = 0; i < history.size(); ++i) {
        const EpochRecord& r = history[i];
        H.row(Index(i)) << r.epoch, r.loss, r.objective, r.orth_residual;
    }
    write_csv(ctx.file("history.csv"), {"epoch", "loss", "objective", "orth_residual"}, H);
}

Mat load_input(const ConfigView& c)
{
    const CsvTable t = read_csv(c.text("data.input", ""));
    if (t.values.rows() < 2 || t.values.cols() < 1)
        throw IoError("data.input: need at least 2 rows and 1 column");
    return t.values;
}

std::vector<std::string> numbered(const std::string& prefix, Index k)
{
    std::vector<std::string> out;
    for (Index i = 1; i <= k; ++i)
        out.push_back(prefix + std::to_string(i));
    return out;
}

json column_stats(const Mat& W)
{
    return {{"column_norms", to_json(Vec(W.colwise().norm().transpose()))}, {"orth_residual", orth_residual(W)}};
}

// ---------------------------------------------------------------- pca

int cmd_pca(RunContext& ctx)
{
    const ConfigView& c = ctx.cfg;
    std::vector<std::string> names = {"svd"};
    names.insert(names.end(), linear_rule_names().begin(), linear_rule_names().end());
    const std::string method = method_choice(c, "svd", names);
    const Index k = Index(bounded(c, "method.k", 4, 1));
    const std::uint64_t data_seed = std::uint64_t(bounded(c, "data.seed", (long long)ctx.seed, 0));
    const Index n = Index(bounded(c, "data.n", 2000, 2));
    const TrainConfig train = resolve_train(c, default_linear_config(200, ctx.seed));
    LinearRule rule;
    if (method != "svd") {
        rule = linear_rule_from_string(method);
        rule.alpha = c.number("method.alpha", rule.alpha);
        rule.rho = c.number("method.rho", rule.rho);
        if (!(rule.rho > 0.0 && rule.rho < 1.0))
            throw ConfigError("method.rho: must lie in (0, 1)");
    }

    Mat X;
    json data;
    if (c.has("data.input")) {
        X = load_input(c);
        data = {{"input", c.text("data.input", "")}};
    } else {
        Vec stds(6);
        stds << 4, 3, 2, 1.5, 1, 0.5;
        X = gen_rotated_gaussian(stds, n, data_seed, data_seed + 1).X;
        data = {{"generator", "rotated_gaussian"}, {"stds", to_json(stds)}, {"n", n}, {"seed", data_seed},
                {"rotation_seed", data_seed + 1}};
    }
    if (k > X.cols())
        throw ConfigError("method.k: " + std::to_string(k) + " exceeds the data dimension " +
                          std::to_string(X.cols()));

    ctx.effective = {{"method", method}, {"k", k}, {"data", data}};
    if (method != "svd") {
        ctx.effective["train"] = to_json(train);
        ctx.effective["alpha"] = rule.alpha;
        ctx.effective["rho"] = rule.rho;
    }

    const PcaBasis<double> svd = pca_fit_svd<double>(X, k);
    Mat W = svd.W;
    if (method != "svd") {
        const LinearFit fit = fit_linear(X, k, rule, train);
        W = fit.W;
        write_history(ctx, fit.train.history);
    }
    write_matrix(ctx.file("W.bin"), W);

    Mat Wn = W;
    for (Index j = 0; j < k; ++j)
        if (Wn.col(j).norm() > 0.0)
            Wn.col(j).normalize();
    ctx.metrics = column_stats(W);
    ctx.metrics["svd_sigma"] = to_json(svd.sigma);
    ctx.metrics["svd_match"] = to_json(match_columns(W, svd.W));
    ctx.metrics["projector_distance"] = projector_distance(Wn, svd.W);
    ctx.out << method << ": min |cos| to SVD " << brief(ctx.metrics["svd_match"]["min_corr"].get<double>())
            << ", projector distance " << brief(ctx.metrics["projector_distance"].get<double>()) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- nlpca

int cmd_nlpca(RunContext& ctx)
{
    const ConfigView& c = ctx.cfg;
    const double a = positive(c, "method.a", 0.8);
    const std::uint64_t data_seed = std::uint64_t(bounded(c, "data.seed", (long long)ctx.seed, 0));
    const TrainConfig train = resolve_train(c, default_signal_config(200, ctx.seed));

    SigmaPcaModel model;
    model.nonlinearity.kind = nonlinearity_from_string(c.text("method.nonlinearity", "scaled_tanh"));
    model.nonlinearity.a = a;
    if (model.nonlinearity.kind == NonlinearityKind::asym_const || model.nonlinearity.kind == NonlinearityKind::asym_adaptive)
        model.nonlinearity.derivative = DerivativeMode::identity;
    model.decoder_mode = parse_enum("method.decoder_mode", c.text("method.decoder_mode", "stopgrad"), kDecoders);
    model.ordering = parse_enum("method.ordering", c.text("method.ordering", "none"), kOrderings);
    model.triangular_variant = int(bounded(c, "method.triangular_variant", 1, 1, 6));
    model.sigma_mode = parse_enum("method.sigma_mode", c.text("method.sigma_mode", "batch"), kSigmaModes);
    model.sigma_l2 = c.number("method.sigma_l2", model.sigma_l2);
    model.nested_rho = c.number("method.rho", model.nested_rho);
    model.mu_mode = MuMode::precentred;

    std::optional<SignalExperiment> truth;
    Mat X;
    json data;
    if (c.has("data.input")) {
        X = load_input(c);
        data = {{"input", c.text("data.input", "")}};
    } else {
        const SignalScenario scenario = signal_scenario_from_string(c.text("data.mixing", "orthogonal"));
        const Index n = Index(bounded(c, "data.n", 2000, 2));
        const double noise = c.number("data.noise", 0.05);
        truth = signal_experiment(scenario, data_seed, n, noise);
        X = truth->X;
        data = {{"mixing", to_string(scenario)}, {"n", n}, {"noise", noise}, {"seed", data_seed}};
    }
    const Index k = Index(bounded(c, "method.k", X.cols(), 1, X.cols()));
    if (model.ordering == Ordering::weighted_latent)
        model.ordering_weights = WeightingSpec::linear_spaced(k);

    ctx.effective = {{"a", a},
                     {"k", k},
                     {"nonlinearity", to_string(model.nonlinearity.kind)},
                     {"decoder_mode", enum_text(model.decoder_mode, kDecoders)},
                     {"ordering", enum_text(model.ordering, kOrderings)},
                     {"triangular_variant", model.triangular_variant},
                     {"sigma_mode", enum_text(model.sigma_mode, kSigmaModes)},
                     {"sigma_l2", model.sigma_l2},
                     {"rho", model.nested_rho},
                     {"data", data},
                     {"train", to_json(train)}};

    const Mat Xc = centred(X);
    const SigmaPcaFit fit = fit_sigma_pca(Xc, k, model, train);
    write_history(ctx, fit.train.history);
    write_matrix(ctx.file("W.bin"), fit.model.W);

    ctx.metrics = column_stats(fit.model.W);
    ctx.metrics["sigma"] = to_json(fit.model.sigma);
    ctx.metrics["recon_error"] = sigma_pca_recon_error(fit.model, Xc);
    ctx.metrics["best_epoch"] = fit.train.best_epoch;
    if (truth) {
        const Mat Y = Xc * fit.model.W;
        const MatchReport m = match_components(Y, truth->truth.S0);
        ctx.metrics["match"] = to_json(m);
        ctx.metrics["variance_errors"] = to_json(variance_errors(Y, truth->truth.S0, m));
        ctx.metrics["amari"] = amari_index(fit.model.W, truth->truth.B0_inv);
        ctx.metrics["success"] = m.min_corr() >= 0.9;
        ctx.out << "nlpca: min matched |corr| " << brief(m.min_corr()) << "\n";
    } else {
        ctx.out << "nlpca: recon error " << brief(ctx.metrics["recon_error"].get<double>()) << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------- signals / ica

void write_signals_csv(RunContext& ctx, const SignalExperiment& data, const Mat& Y, const MatchReport& m)
{
    const Index k = data.truth.S0.cols();
    const Index p = data.X.cols();
    // Recovered columns are permuted and sign-flipped onto the true sources.
    Mat aligned = Mat::Zero(Y.rows(), k);
    for (std::size_t i = 0; i < m.perm.size(); ++i)
        aligned.col(m.perm[i]) = double(m.signs[i]) * Y.col(Index(i));
    Mat T(data.X.rows(), 1 + k + p + k);
    T << data.t, data.truth.S0, data.X, aligned;
    std::vector<std::string> header = {"t"};
    for (const auto& part : {numbered("true_", k), numbered("mixed_", p), numbered("recovered_", k)})
        header.insert(header.end(), part.begin(), part.end());
    write_csv(ctx.file("signals.csv"), header, T);
}

int run_separation(RunContext& ctx, const std::string& default_method, const std::vector<std::string>& allowed,
                   const std::string& default_mixing, bool allow_input)
{
    const ConfigView& c = ctx.cfg;
    SeparationOptions sep;
    sep.method = separation_method_from_string(method_choice(c, default_method, allowed));
    sep.a = positive(c, "method.a", 0.8);
    sep.seed = ctx.seed;
    sep.train = resolve_train(c, default_signal_config(200, ctx.seed));
    sep.epochs = sep.train->epochs;
    const std::uint64_t data_seed = std::uint64_t(bounded(c, "data.seed", (long long)ctx.seed, 0));

    ctx.effective = {{"method", to_string(sep.method)}, {"a", sep.a}, {"train", to_json(*sep.train)}};

    if (allow_input && c.has("data.input")) {
        const Mat X = load_input(c);
        const Index k = Index(bounded(c, "method.k", X.cols(), 1, X.cols()));
        ctx.effective["k"] = k;
        ctx.effective["data"] = {{"input", c.text("data.input", "")}};
        const SeparationResult r = separate(X, k, sep);
        if (!r.history.empty())
            write_history(ctx, r.history);
        write_matrix(ctx.file("B.bin"), r.B);
        write_csv(ctx.file("recovered.csv"), numbered("recovered_", k), r.Y);
        ctx.metrics = column_stats(r.W);
        ctx.metrics["sigma"] = to_json(r.sigma);
        ctx.out << ctx.command << ": " << k << " components recovered\n";
        return kExitOk;
    }

    SignalRunOptions o;
    o.scenario = signal_scenario_from_string(c.text("data.mixing", default_mixing));
    o.separation = sep;
    o.n = Index(bounded(c, "data.n", 2000, 3));
    o.noise_fraction = c.number("data.noise", 0.05);
    if (o.noise_fraction < 0.0)
        throw ConfigError("data.noise: must be >= 0");
    o.data_seed = data_seed;
    if (c.has("method.k") && c.integer("method.k", 3) != 3)
        throw ConfigError("method.k: generated signal mixtures have exactly 3 sources");
    ctx.effective["k"] = 3;
    ctx.effective["data"] = {
        {"mixing", to_string(o.scenario)}, {"n", o.n}, {"noise", o.noise_fraction}, {"seed", o.data_seed}};

    const SignalRun run = run_signals(o);
    if (!run.fit.history.empty())
        write_history(ctx, run.fit.history);
    write_matrix(ctx.file("W.bin"), run.fit.W);
    write_matrix(ctx.file("B.bin"), run.fit.B);
    write_signals_csv(ctx, run.data, run.fit.Y, run.match);

    ctx.metrics = {{"match", to_json(run.match)},
                   {"variance_errors", to_json(run.variance_errors)},
                   {"amari", run.amari},
                   {"orth_residual", run.orth_residual},
                   {"success", run.success},
                   {"sigma", to_json(run.fit.sigma)},
                   {"source_std", to_json(run.data.truth.source_std)}};
    ctx.out << ctx.command << " " << to_string(o.scenario) << " " << to_string(sep.method) << ": matched |corr| ";
    for (Index i = 0; i < run.match.corrs.size(); ++i)
        ctx.out << (i ? " " : "") << brief(run.match.corrs(i));
    ctx.out << (run.success ? " (recovered)" : " (not recovered: min |corr| < 0.9)") << "\n";
    return kExitOk;
}

int cmd_signals(RunContext& ctx)
{
    return run_separation(ctx, "nlpca", {"pca", "nlpca", "fastica", "two_stage", "two_layer", "easi"},
                          "orthogonal", false);
}

int cmd_ica(RunContext& ctx)
{
    return run_separation(ctx, "fastica", {"fastica", "two_stage", "two_layer", "easi"}, "non-orthogonal", true);
}

// ---------------------------------------------------------------- points2d

int cmd_points2d(RunContext& ctx)
{
    const ConfigView& c = ctx.cfg;
    PointsRunOptions o;
    o.dist = point_dist_from_string(c.text("data.dist", "uniform"));
    o.theta = c.number("data.theta", o.theta);
    o.n = Index(bounded(c, "data.n", 1000, 2));
    o.data_seed = std::uint64_t(bounded(c, "data.seed", (long long)ctx.seed, 0));
    o.separation.method = separation_method_from_string(
        method_choice(c, "nlpca", {"pca", "nlpca", "fastica", "two_stage", "two_layer", "easi"}));
    o.separation.a = positive(c, "method.a", 0.5);
    o.separation.seed = ctx.seed;
    // 500 epochs and the last checkpoint: with 100 epochs and best-loss
    // selection the uniform case misses 3 degrees on some seeds.
    TrainConfig base = default_signal_config(500, ctx.seed);
    base.checkpoint = CheckpointPolicy::last;
    o.separation.train = resolve_train(c, base);
    o.separation.epochs = o.separation.train->epochs;

    ctx.effective = {{"method", to_string(o.separation.method)},
                     {"a", o.separation.a},
                     {"train", to_json(*o.separation.train)},
                     {"data", {{"dist", to_string(o.dist)}, {"theta", o.theta}, {"n", o.n}, {"seed", o.data_seed}}}};

    const PointsRun run = run_points2d(o);
    if (!run.fit.history.empty())
        write_history(ctx, run.fit.history);
    write_csv(ctx.file("points.csv"), {"x1", "x2"}, run.X);
    write_matrix(ctx.file("W.bin"), run.fit.W);
    ctx.metrics = column_stats(run.fit.W);
    ctx.metrics["angle_error_deg"] = run.angle_error_deg;
    ctx.metrics["W"] = to_json(run.fit.W);
    ctx.metrics["sigma"] = to_json(run.fit.sigma);
    ctx.out << "points2d " << to_string(o.dist) << ": angle error " << brief(run.angle_error_deg)
            << " deg (mod 90)\n";
    return kExitOk;
}

// ---------------------------------------------------------------- patches

int cmd_patches(RunContext& ctx)
{
    const ConfigView& c = ctx.cfg;
    PatchRunOptions o;
    o.method = patch_method_from_string(c.text("method.name", "nlpca"));
    o.a = positive(c, "method.a", o.a);
    o.k = Index(bounded(c, "method.k", o.k, 1));
    o.images = Index(bounded(c, "data.images", o.images, 1));
    o.image_size = Index(bounded(c, "data.image_size", o.image_size, 1));
    o.patch = Index(bounded(c, "data.patch", o.patch, 1));
    o.stride = Index(bounded(c, "data.stride", o.stride, 1));
    o.zero_pad = c.boolean("data.zero_pad", o.zero_pad);
    o.seed = std::uint64_t(bounded(c, "data.seed", (long long)ctx.seed, 0));
    o.rica.beta = positive(c, "method.rica_beta", o.rica.beta);
    o.rica.adaptive = c.boolean("method.rica_adaptive", o.rica.adaptive);
    o.rica.penalty = parse_enum("method.rica_penalty", c.text("method.rica_penalty", "l1"), kRicaPenalties);
    o.train = resolve_train(c, default_patch_config(30, ctx.seed));
    o.epochs = o.train->epochs;
    GridOptions grid;
    grid.gap = Index(bounded(c, "output.tile_gap", grid.gap, 0, 64));
    grid.scale = Index(bounded(c, "output.tile_scale", grid.scale, 1, 64));
    grid.columns = Index(bounded(c, "output.grid_columns", grid.columns, 0));

    std::vector<Image> images;
    json data;
    if (c.has("data.image_dir")) {
        images = read_image_folder(c.text("data.image_dir", ""));
        if (images.empty())
            throw IoError("data.image_dir: no .png/.pgm/.ppm/.pnm files in " + c.text("data.image_dir", ""));
        data = {{"image_dir", c.text("data.image_dir", "")}, {"images", images.size()}};
    } else {
        data = {{"generator", "bars"}, {"images", o.images}, {"image_size", o.image_size}, {"seed", o.seed}};
    }
    data["patch"] = o.patch;
    data["stride"] = o.stride;
    data["zero_pad"] = o.zero_pad;
    ctx.effective = {{"method", to_string(o.method)}, {"a", o.a}, {"k", o.k}, {"data", data},
                     {"train", to_json(*o.train)},
                     {"grid", {{"gap", grid.gap}, {"scale", grid.scale}, {"columns", grid.columns}}}};
    if (o.method == PatchMethod::rica)
        ctx.effective["rica"] = {{"beta", o.rica.beta},
                                 {"adaptive", o.rica.adaptive},
                                 {"penalty", enum_text(o.rica.penalty, kRicaPenalties)}};

    const PatchRun run = run_patches(o, images.empty() ? nullptr : &images);
    if (!run.history.empty())
        write_history(ctx, run.history);
    write_matrix(ctx.file("W.bin"), run.W);
    write_png(ctx.file("filters.png"), filter_grid(run.W, run.patch, run.channels, grid));
    ctx.metrics = column_stats(run.W);
    ctx.metrics["sigma"] = to_json(run.sigma);
    ctx.metrics["channels"] = run.channels;
    ctx.out << "patches " << to_string(o.method) << ": " << run.W.cols() << " filters of " << run.patch << "x"
            << run.patch << "x" << run.channels << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(RunContext& ctx)
{
    const ConfigView& c = ctx.cfg;
    GradSuiteOptions o;
    o.seed = ctx.seed;
    o.instances = int(bounded(c, "gradcheck.instances", o.instances, 1, 1000));
    o.tol = positive(c, "gradcheck.tol", o.tol);
    ctx.effective = {{"seed", o.seed}, {"instances", o.instances}, {"h", o.h}, {"tol", o.tol}};

    const std::vector<GradSuiteEntry> entries = run_gradient_suite(o);
    json rows = json::array();
    bool all = true;
    for (const GradSuiteEntry& e : entries) {
        rows.push_back({{"module", e.module},
                        {"op", e.op},
                        {"instances", e.instances},
                        {"max_rel_error", e.max_rel_error},
                        {"passed", e.passed}});
        all = all && e.passed;
    }
    ctx.metrics = {{"entries", rows}, {"all_passed", all}, {"count", entries.size()}};
    for (const GradSuiteEntry& e : entries)
        ctx.out << (e.passed ? "ok    " : "FAIL  ") << std::left << std::setw(12) << e.module << std::setw(34)
                << e.op << brief(e.max_rel_error) << "\n";
    ctx.out << entries.size() << " ops, " << (all ? "all passed" : "FAILURES") << "\n";
    return all ? kExitOk : kExitFailure;
}

int dispatch(RunContext& ctx)
{
    if (ctx.command == "pca")
        return cmd_pca(ctx);
    if (ctx.command == "nlpca")
        return cmd_nlpca(ctx);
    if (ctx.command == "ica")
        return cmd_ica(ctx);
    if (ctx.command == "signals")
        return cmd_signals(ctx);
    if (ctx.command == "points2d")
        return cmd_points2d(ctx);
    if (ctx.command == "patches")
        return cmd_patches(ctx);
    if (ctx.command == "gradcheck")
        return cmd_gradcheck(ctx);
    throw ConfigError("unknown command '" + ctx.command + "'");
}

json manifest_json(const RunContext& ctx, const Settings& settings, const std::string& status)
{
    Settings recorded = settings;
    recorded.erase("output.dir");
    return {{"schema_version", kManifestSchema},
            {"toolkit_version", toolkit_version()},
            {"command", ctx.command},
            {"status", status},
            {"settings", recorded},
            {"effective", ctx.effective},
            {"seed", ctx.seed},
            {"created", utc_timestamp("%Y-%m-%dT%H:%M:%SZ")},
            {"formats",
             {{"metrics", kMetricsSchema},
              {"csv", "RFC 4180, header row, shortest round-trip decimals"},
              {"matrix", "SPCAMAT1: magic, uint64 rows, uint64 cols, row-major float64, little-endian"}}},
            {"metrics", ctx.metrics},
            {"files", ctx.files}};
}

// ---------------------------------------------------------------- report

std::string cell(const json& v)
{
    if (v.is_number_float()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", v.get<double>());
        return buf;
    }
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_array()) {
        std::string s;
        for (const json& e : v)
            s += (s.empty() ? "" : " ") + cell(e);
        return s;
    }
    return v.dump();
}

bool is_table(const json& v)
{
    if (!v.is_array() || v.empty())
        return false;
    for (const json& e : v)
        if (!e.is_object() || e.size() != v.front().size())
            return false;
    return true;
}

void render(const json& j, const std::string& prefix, std::ostream& out)
{
    std::vector<std::pair<std::string, std::string>> rows;
    std::size_t width = 0;
    std::vector<std::pair<std::string, const json*>> nested;
    for (const auto& [key, value] : j.items()) {
        const std::string name = prefix + key;
        if (value.is_object()) {
            nested.emplace_back(name, &value);
        } else if (is_table(value)) {
            nested.emplace_back(name, &value);
        } else {
            rows.emplace_back(name, cell(value));
            width = std::max(width, name.size());
        }
    }
    for (const auto& [name, text] : rows)
        out << std::left << std::setw(int(width) + 2) << name << text << "\n";
    for (const auto& [name, value] : nested) {
        if (value->is_object()) {
            render(*value, name + ".", out);
            continue;
        }
        out << "\n" << name << ":\n";
        std::vector<std::string> cols;
        for (const auto& [k, _] : value->front().items())
            cols.push_back(k);
        std::vector<std::size_t> w(cols.size());
        for (std::size_t i = 0; i < cols.size(); ++i) {
            w[i] = cols[i].size();
            for (const json& r : *value)
                w[i] = std::max(w[i], cell(r.value(cols[i], json())).size());
        }
        for (std::size_t i = 0; i < cols.size(); ++i)
            out << std::left << std::setw(int(w[i]) + 2) << cols[i];
        out << "\n";
        for (const json& r : *value) {
            for (std::size_t i = 0; i < cols.size(); ++i)
                out << std::left << std::setw(int(w[i]) + 2) << cell(r.value(cols[i], json()));
            out << "\n";
        }
    }
}

fs::path locate_json(const fs::path& p)
{
    if (!fs::is_directory(p))
        return p;
    if (fs::exists(p / kManifestName))
        return p / kManifestName;
    return p / "metrics.json";
}

int cmd_report(const std::string& path, std::ostream& out, std::ostream& err)
{
    try {
        const json j = read_json(locate_json(path));
        if (j.contains("command") && j.contains("metrics")) {
            out << std::left << std::setw(17) << "command" << cell(j["command"]) << "\n";
            for (const char* key : {"status", "seed", "toolkit_version", "created"})
                if (j.contains(key))
                    out << std::left << std::setw(17) << key << cell(j[key]) << "\n";
            out << "\n";
            render(j["metrics"], "", out);
        } else {
            render(j, "", out);
        }
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

// ---------------------------------------------------------------- replay

bool same_bytes(const fs::path& a, const fs::path& b)
{
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb)
        return false;
    return std::string(std::istreambuf_iterator<char>(fa), {}) == std::string(std::istreambuf_iterator<char>(fb), {});
}

int cmd_replay(const std::string& manifest_path, const std::string& out_dir, std::ostream& out, std::ostream& err)
{
    fs::path path = manifest_path;
    if (fs::is_directory(path))
        path /= kManifestName;
    json m;
    try {
        m = read_json(path);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    if (m.value("schema_version", 0) != kManifestSchema) {
        err << "error: " << path.string() << " is not a version " << kManifestSchema << " manifest\n";
        return kExitUsage;
    }
    Settings settings = m.at("settings").get<Settings>();
    if (!out_dir.empty())
        settings["output.dir"] = out_dir;
    std::string new_dir;
    const int status = execute_command(m.at("command").get<std::string>(), settings, out, err, &new_dir);
    if (status != kExitOk && status != kExitFailure)
        return status;

    const fs::path old_dir = path.parent_path();
    bool identical = true;
    for (const std::string& f : m.at("files").get<std::vector<std::string>>()) {
        const bool same = same_bytes(old_dir / f, fs::path(new_dir) / f);
        identical = identical && same;
        out << (same ? "identical  " : "DIFFERS    ") << f << "\n";
    }
    out << (identical ? "replay reproduced every file bitwise" : "replay differs") << "\n";
    return identical ? kExitOk : kExitFailure;
}

Settings absolutise_paths(Settings s)
{
    for (const char* key : {"data.input", "data.image_dir"})
        if (const auto it = s.find(key); it != s.end() && !it->second.empty())
            it->second = fs::absolute(it->second).lexically_normal().string();
    return s;
}

std::string flag_help(const ConfigKey& k)
{
    std::string h = k.help + " [" + k.key + "]";
    if (!k.choices.empty()) {
        h += " {";
        for (std::size_t i = 0; i < k.choices.size(); ++i)
            h += (i ? "," : "") + k.choices[i];
        h += "}";
    }
    return h;
}

}  // namespace

const char* toolkit_version() { return SPCA_VERSION; }

const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const CommandInfo& c : commands())
            out.push_back(c.name);
        out.push_back("report");
        out.push_back("replay");
        return out;
    }();
    return names;
}

const std::vector<std::string>& command_keys(const std::string& command)
{
    static const std::vector<std::string> none;
    const CommandInfo* c = find_command(command);
    return c ? c->keys : none;
}

int execute_command(const std::string& command, const Settings& settings, std::ostream& out, std::ostream& err,
                    std::string* out_dir)
{
    if (!find_command(command)) {
        err << "error: unknown command '" << command << "'\n";
        return kExitUsage;
    }
    for (const auto& [key, value] : settings) {
        if (!find_config_key(key)) {
            err << "config error: unknown key '" << key << "'\n";
            return kExitUsage;
        }
    }
    const ConfigView view(settings);
    std::uint64_t seed = 0;
    fs::path dir;
    try {
        seed = std::uint64_t(bounded(view, "train.seed", 0, 0));
        dir = choose_output_dir(view, seed);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    }
    if (out_dir)
        *out_dir = dir.string();

    RunContext ctx{command, view, dir, out, seed, json::object(), json::object(), {}};
    int status = kExitOk;
    try {
        status = dispatch(ctx);
        ctx.metrics["schema"] = kMetricsSchema;
        write_json(ctx.file("metrics.json"), ctx.metrics);
        // Not listed in its own file list: it carries a creation time.
        write_json(dir / kManifestName, manifest_json(ctx, settings, status == kExitOk ? "ok" : "failed"));
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const TrainingDiverged& e) {
        err << "diverged: " << e.what() << "\n";
        try {
            write_matrix(ctx.file("W_snapshot.bin"), e.snapshot.W);
            json diag = {{"error", e.what()},
                         {"epoch", e.epoch},
                         {"step", e.step},
                         {"command", command},
                         {"effective", ctx.effective},
                         {"W_finite", e.snapshot.W.allFinite()},
                         {"snapshot", "W_snapshot.bin"}};
            write_json(ctx.file("diagnostic.json"), diag);
            write_json(dir / kManifestName, manifest_json(ctx, settings, "diverged"));
            err << "diagnostic written to " << (dir / "diagnostic.json").string() << "\n";
        } catch (const std::exception& io) {
            err << "error: could not write diagnostic: " << io.what() << "\n";
        }
        return kExitDiverged;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    out << "wrote " << dir.string() << "\n";
    return status;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Linear PCA, sigma-PCA and linear ICA as single-layer autoencoders.", "spca"};
    app.set_version_flag("--version", std::string(toolkit_version()));
    app.require_subcommand(1);
    app.footer(std::string("Output root: --out, else $") + kOutputRootEnv +
               ", else ./runs. Exit codes: 0 ok, 1 failure, 2 usage, 3 diverged.");

    std::map<std::string, std::string> flags;
    std::string config_path;
    std::map<std::string, CLI::App*> subs;
    for (const CommandInfo& info : commands()) {
        CLI::App* sub = app.add_subcommand(info.name, info.help);
        sub->add_option("--config", config_path, "configuration file (flags take precedence)");
        for (const std::string& key : info.keys) {
            const ConfigKey* k = find_config_key(key);
            sub->add_option_function<std::string>(
                "--" + k->flag, [&flags, key](const std::string& v) { flags[key] = v; },
                key == "method.name" ? "one of " + info.methods : flag_help(*k));
        }
        subs[info.name] = sub;
    }
    std::string report_path, replay_path, replay_out;
    CLI::App* report = app.add_subcommand("report", "print a run's manifest or metrics JSON as a table");
    report->add_option("path", report_path, "run directory or JSON file")->required();
    CLI::App* replay = app.add_subcommand("replay", "re-run a manifest and compare every output file bytewise");
    replay->add_option("manifest", replay_path, "manifest.json or its run directory")->required();
    replay->add_option("--out", replay_out, "output directory for the replay");

    std::vector<const char*> argv = {"spca"};
    for (const std::string& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kExitOk;
        }
        err << "usage error: " << e.what() << "\nRun with --help for usage.\n";
        return kExitUsage;
    }

    if (report->parsed())
        return cmd_report(report_path, out, err);
    if (replay->parsed())
        return cmd_replay(replay_path, replay_out, out, err);

    for (const auto& [name, sub] : subs) {
        if (!sub->parsed())
            continue;
        Settings settings;
        try {
            if (!config_path.empty())
                settings = load_config(config_path);
        } catch (const ConfigError& e) {
            err << "config error: " << e.what() << "\n";
            return kExitUsage;
        }
        for (const auto& [key, value] : flags)
            settings[key] = value;
        return execute_command(name, absolutise_paths(settings), out, err);
    }
    err << "usage error: no command given\n";
    return kExitUsage;
}

int run_cli(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace spca
