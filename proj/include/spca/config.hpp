#ifndef SPCA_CONFIG_HPP
#define SPCA_CONFIG_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spca {

// Plain-text run configuration.
//
//   # comment            ; comment
//   lr = 0.001           bare keys resolve through their flag name
//   [optimizer]
//   kind = adam          becomes optimizer.kind
//   data.n = 500         dotted keys work anywhere outside a section
//
// Values are kept as text until a command resolves them, so a file can be
// shared between commands that read different keys.

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line = 0) : std::runtime_error(what), line_(line) {}
    int line() const { return line_; }  // 0 when not tied to a file line

private:
    int line_;
};

enum class KeyType { number, integer, boolean, text, path };

struct ConfigKey {
    std::string key;   // section.name
    std::string flag;  // command-line spelling without the leading dashes
    KeyType type;
    std::vector<std::string> choices;  // empty: any value of the type
    std::string help;
};

const std::vector<ConfigKey>& config_schema();

// nullptr when `key` is not in the schema.
const ConfigKey* find_config_key(const std::string& key);

// Closest schema key (or bare flag name) by edit distance; empty if nothing is close.
std::string suggest_config_key(const std::string& unknown);

using Settings = std::map<std::string, std::string>;

// Throws ConfigError with the 1-based line number on malformed lines, unknown
// keys and keys given twice.
Settings parse_config(std::string_view text, const std::string& source = "<config>");
Settings load_config(const std::filesystem::path& path);

// Typed view over settings. Every accessor validates against the schema type
// and choices and names the key in its error.
class ConfigView {
public:
    explicit ConfigView(const Settings& settings) : settings_(settings) {}
    explicit ConfigView(Settings&&) = delete;  // holds a reference

    bool has(const std::string& key) const { return settings_.count(key) != 0; }
    double number(const std::string& key, double fallback) const;
    long long integer(const std::string& key, long long fallback) const;
    bool boolean(const std::string& key, bool fallback) const;
    std::string text(const std::string& key, const std::string& fallback) const;

    const Settings& settings() const { return settings_; }

private:
    const std::string* raw(const std::string& key) const;
    const Settings& settings_;
};

}  // namespace spca

#endif
