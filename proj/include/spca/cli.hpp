#ifndef SPCA_CLI_HPP
#define SPCA_CLI_HPP

#include "spca/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace spca {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;   // runtime error, failed gradient check, replay mismatch
inline constexpr int kExitUsage = 2;     // bad flags or configuration
inline constexpr int kExitDiverged = 3;  // non-finite training; diagnostic.json written

// Environment variable naming the default output root (else ./runs).
inline constexpr const char* kOutputRootEnv = "SPCA_OUTPUT_ROOT";

const char* toolkit_version();

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

// Runs `command` with already merged settings. Used by replay and by tests
// that bypass flag parsing. Returns the exit status; the output directory
// actually used is stored in `out_dir`.
int execute_command(const std::string& command, const Settings& settings, std::ostream& out, std::ostream& err,
                    std::string* out_dir = nullptr);

// Keys a command reads; flags outside this set are rejected for that command.
const std::vector<std::string>& command_keys(const std::string& command);
const std::vector<std::string>& command_names();

}  // namespace spca

#endif
