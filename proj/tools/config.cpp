#include "spca/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace spca {

namespace {

using T = KeyType;

std::vector<ConfigKey> build_schema()
{
    return {
        {"optimizer.kind", "optimizer", T::text, {"sgd", "adam"}, "optimizer"},
        {"optimizer.lr", "lr", T::number, {}, "learning rate, > 0"},
        {"optimizer.momentum", "momentum", T::number, {}, "SGD momentum in [0, 1)"},
        {"optimizer.beta1", "beta1", T::number, {}, "Adam first-moment decay in [0, 1)"},
        {"optimizer.beta2", "beta2", T::number, {}, "Adam second-moment decay in [0, 1)"},
        {"optimizer.eps", "eps", T::number, {}, "Adam denominator floor, > 0"},

        {"train.batch_size", "batch-size", T::integer, {}, "mini-batch size"},
        {"train.epochs", "epochs", T::integer, {}, "passes over the data"},
        {"train.seed", "seed", T::integer, {}, "seed for initialisation and shuffling"},
        {"train.checkpoint", "checkpoint", T::text, {"best_loss", "last"}, "which weights to keep"},

        {"constraints.unit_norm", "unit-norm", T::text, {"none", "project", "regularize", "weight_norm"},
         "unit column norm constraint"},
        {"constraints.unit_norm_strength", "unit-norm-strength", T::number, {}, "regulariser strength"},
        {"constraints.orthogonality", "orthogonality", T::text,
         {"none", "symmetric_reg", "asymmetric_reg", "iterative", "gram_schmidt"}, "orthogonality constraint"},
        {"constraints.orth_alpha", "orth-alpha", T::number, {}, "symmetric regulariser strength"},
        {"constraints.orth_beta", "orth-beta", T::number, {}, "asymmetric strength or iterative step"},
        {"constraints.sigma_weighted", "sigma-weighted", T::boolean, {}, "weight the asymmetric regulariser by sigma"},

        {"method.name", "method", T::text, {}, "method name; the choices depend on the command"},
        {"method.a", "a", T::number, {}, "nonlinearity scale, a tanh(z/a)"},
        {"method.k", "k", T::integer, {}, "number of components"},
        {"method.alpha", "alpha", T::number, {}, "weighted variance sign and scale"},
        {"method.rho", "rho", T::number, {}, "nested dropout geometric parameter in (0, 1)"},
        {"method.decoder_mode", "decoder-mode", T::text,
         {"stopgrad", "full", "rescaled", "sigma_dropped", "encoder_scaled", "conventional"}, "decoder gradient"},
        {"method.ordering", "ordering", T::text,
         {"none", "projective_deflation", "triangular", "weighted_latent", "nested"}, "component ordering"},
        {"method.triangular_variant", "triangular-variant", T::integer, {}, "1..6"},
        {"method.sigma_mode", "sigma-mode", T::text, {"batch", "ema", "trainable"}, "how sigma is obtained"},
        {"method.sigma_l2", "sigma-l2", T::number, {}, "L2 penalty on trainable sigma"},
        {"method.nonlinearity", "nonlinearity", T::text,
         {"scaled_tanh", "hard_tanh", "asym_const", "asym_adaptive", "linear", "sign"}, "nonlinearity"},
        {"method.rica_beta", "rica-beta", T::number, {}, "RICA sparsity weight (beta0 when adaptive)"},
        {"method.rica_adaptive", "rica-adaptive", T::boolean, {}, "scale the RICA weight by E||x||"},
        {"method.rica_penalty", "rica-penalty", T::text, {"l1", "logcosh"}, "RICA sparsity penalty"},

        {"data.input", "input", T::path, {}, "CSV file with a header row, one sample per row"},
        {"data.mixing", "mixing", T::text, {"orthogonal", "orthogonal-distinct", "non-orthogonal"},
         "signal mixing scenario"},
        {"data.dist", "dist", T::text, {"uniform", "laplace", "gaussian"}, "2-D source distribution"},
        {"data.theta", "theta", T::number, {}, "2-D rotation angle, radians"},
        {"data.n", "n", T::integer, {}, "number of generated samples"},
        {"data.noise", "noise", T::number, {}, "signal noise as a fraction of each source std"},
        {"data.images", "images", T::integer, {}, "number of generated images"},
        {"data.image_size", "image-size", T::integer, {}, "generated image side length"},
        {"data.patch", "patch", T::integer, {}, "patch side length"},
        {"data.stride", "stride", T::integer, {}, "patch stride"},
        {"data.zero_pad", "zero-pad", T::boolean, {}, "pad images by patch/2 zeros"},
        {"data.image_dir", "image-dir", T::path, {}, "folder of PNG/PGM/PPM images"},
        {"data.seed", "data-seed", T::integer, {}, "seed for generated data; defaults to train.seed"},

        {"output.dir", "out", T::path, {}, "output directory"},
        {"output.tile_gap", "tile-gap", T::integer, {}, "pixels between filter tiles"},
        {"output.tile_scale", "tile-scale", T::integer, {}, "pixel magnification of filter tiles"},
        {"output.grid_columns", "grid-columns", T::integer, {}, "filter grid columns, 0 for a square grid"},

        {"gradcheck.instances", "instances", T::integer, {}, "random instances per op"},
        {"gradcheck.tol", "tol", T::number, {}, "maximum relative error"},
    };
}

std::string trim(std::string_view s)
{
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
        ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
        --e;
    return std::string(s.substr(b, e - b));
}

std::string flag_to_bare(const std::string& flag)
{
    std::string s = flag;
    std::replace(s.begin(), s.end(), '-', '_');
    return s;
}

std::size_t edit_distance(const std::string& a, const std::string& b)
{
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j)
        prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// Resolves a key as written in a file: dotted, bare flag name, or inside a section.
const ConfigKey* resolve_key(const std::string& section, const std::string& name)
{
    if (!section.empty())
        return find_config_key(section + "." + name);
    if (name.find('.') != std::string::npos)
        return find_config_key(name);
    for (const ConfigKey& k : config_schema())
        if (flag_to_bare(k.flag) == name)
            return &k;
    return nullptr;
}

std::string unquote(const std::string& v)
{
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\'')))
        return v.substr(1, v.size() - 2);
    return v;
}

// Strips a trailing comment that starts with whitespace then # or ;.
std::string strip_comment(const std::string& line)
{
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quote) {
            if (c == quote)
                quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if ((c == '#' || c == ';') && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
            return line.substr(0, i);
        }
    }
    return line;
}

}  // namespace

const std::vector<ConfigKey>& config_schema()
{
    static const std::vector<ConfigKey> schema = build_schema();
    return schema;
}

const ConfigKey* find_config_key(const std::string& key)
{
    for (const ConfigKey& k : config_schema())
        if (k.key == key)
            return &k;
    return nullptr;
}

std::string suggest_config_key(const std::string& unknown)
{
    std::string best;
    std::size_t best_d = std::string::npos;
    for (const ConfigKey& k : config_schema()) {
        for (const std::string& cand : {k.key, flag_to_bare(k.flag), k.key.substr(k.key.find('.') + 1)}) {
            const std::size_t d = edit_distance(unknown, cand);
            if (d < best_d) {
                best_d = d;
                best = k.key;
            }
        }
    }
    // Suggestions further than a third of the word away are noise.
    return best_d <= std::max<std::size_t>(2, unknown.size() / 3) ? best : std::string();
}

Settings parse_config(std::string_view text, const std::string& source)
{
    Settings out;
    std::map<std::string, int> seen_at;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw_line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) -> ConfigError {
        return ConfigError(source + ":" + std::to_string(line_no) + ": " + msg, line_no);
    };
    while (std::getline(in, raw_line)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw_line));
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw fail("unterminated section header '" + line + "'");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            bool known = false;
            for (const ConfigKey& k : config_schema())
                known = known || k.key.rfind(section + ".", 0) == 0;
            if (!known)
                throw fail("unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw fail("expected 'key = value', got '" + line + "'");
        const std::string name = trim(std::string_view(line).substr(0, eq));
        const std::string value = unquote(trim(std::string_view(line).substr(eq + 1)));
        if (name.empty())
            throw fail("missing key before '='");
        const ConfigKey* key = resolve_key(section, name);
        if (!key) {
            const std::string written = section.empty() ? name : section + "." + name;
            const std::string hint = suggest_config_key(written);
            throw fail("unknown key '" + written + "'" + (hint.empty() ? "" : " (did you mean '" + hint + "'?)"));
        }
        if (const auto it = seen_at.find(key->key); it != seen_at.end())
            throw fail("'" + key->key + "' already set on line " + std::to_string(it->second));
        seen_at[key->key] = line_no;
        out[key->key] = value;
    }
    return out;
}

Settings load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.string());
}

const std::string* ConfigView::raw(const std::string& key) const
{
    const ConfigKey* k = find_config_key(key);
    if (!k)
        throw std::logic_error("config key '" + key + "' is not in the schema");
    const auto it = settings_.find(key);
    if (it == settings_.end())
        return nullptr;
    if (!k->choices.empty() && std::find(k->choices.begin(), k->choices.end(), it->second) == k->choices.end()) {
        std::string list;
        for (const std::string& c : k->choices)
            list += (list.empty() ? "" : ", ") + c;
        throw ConfigError(key + ": '" + it->second + "' is not one of " + list);
    }
    return &it->second;
}

double ConfigView::number(const std::string& key, double fallback) const
{
    const std::string* v = raw(key);
    if (!v)
        return fallback;
    double out = 0.0;
    const auto [end, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || end != v->data() + v->size() || !std::isfinite(out))
        throw ConfigError(key + ": expected a finite number, got '" + *v + "'");
    return out;
}

long long ConfigView::integer(const std::string& key, long long fallback) const
{
    const std::string* v = raw(key);
    if (!v)
        return fallback;
    long long out = 0;
    const auto [end, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || end != v->data() + v->size())
        throw ConfigError(key + ": expected an integer, got '" + *v + "'");
    return out;
}

bool ConfigView::boolean(const std::string& key, bool fallback) const
{
    const std::string* v = raw(key);
    if (!v)
        return fallback;
    std::string s = *v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    if (s == "true" || s == "yes" || s == "on" || s == "1")
        return true;
    if (s == "false" || s == "no" || s == "off" || s == "0")
        return false;
    throw ConfigError(key + ": expected true or false, got '" + *v + "'");
}

std::string ConfigView::text(const std::string& key, const std::string& fallback) const
{
    const std::string* v = raw(key);
    return v ? *v : fallback;
}

}  // namespace spca
