#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace maser::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitBudget = 3;

inline constexpr int kCsvSchemaVersion = 1;

enum class Kind { Simulate, Spectrum, Resonances, Metastable, Witness, Sweep };

const char* to_string(Kind k);
/// Throws ValidationError for unknown names.
Kind parse_kind(const std::string& name);

struct RunOptions {
  std::filesystem::path out;
  bool overwrite = false;
  bool record_time = false;  // write wall_time_seconds to the manifest
};

struct RunResult {
  int exit_code = kExitOk;
  std::string message;
  std::vector<std::filesystem::path> files;
};

/// Validates a JSON config for `kind` and runs it, writing CSV files and
/// manifest.json into options.out. Errors are mapped to exit codes.
RunResult run_experiment(Kind kind, const std::string& config_text, const RunOptions& options);
RunResult run_experiment_file(Kind kind, const std::filesystem::path& config,
                              const RunOptions& options);

/// Fully resolved config (defaults filled in) as canonical JSON text.
/// Throws ValidationError.
std::string resolve_config(Kind kind, const std::string& config_text);

/// printf("%.17g").
std::string format_double(double v);

/// Command-line entry point: maser <subcommand> --config <path> --out <dir> [--overwrite].
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace maser::cli
