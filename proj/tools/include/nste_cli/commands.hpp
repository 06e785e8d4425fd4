#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

namespace nste::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2, kInconclusive = 3 };

/// Result of executing one subcommand.
struct Outcome {
    int exit_code = kOk;
    std::string summary;
};

/// Runs `subcommand` from its fully resolved config into run_dir and writes
/// the run manifest. Everything the command does is determined by `config`.
Outcome execute(const std::string& subcommand, const nlohmann::json& config, const std::filesystem::path& run_dir);

/// Re-executes the run described by a manifest into a new directory.
Outcome rerun(const std::filesystem::path& manifest_path, const std::filesystem::path& run_dir);

/// Default output root: $NSTE_OUTPUT_ROOT, or ./nste_runs.
std::filesystem::path output_root();

/// <output_root>/<subcommand>-<UTC timestamp>-<seed>.
std::filesystem::path default_run_dir(const std::string& subcommand, std::uint64_t seed);

/// Seed from the command line, or a freshly drawn one.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag);

/// Maps an exception thrown during a command to an exit code and prints it.
int report_error(const std::exception& e);

}  // namespace nste::cli
