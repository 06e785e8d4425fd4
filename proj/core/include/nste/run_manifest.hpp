#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace nste {

inline constexpr const char* kRunManifestName = "run_manifest.json";

/// Everything needed to repeat a CLI invocation. `config` is the fully
/// resolved configuration, so a rerun needs no other input.
struct RunManifest {
    std::string subcommand;
    nlohmann::json config = nlohmann::json::object();
    nlohmann::json seeds = nlohmann::json::object();
    nlohmann::json input_hashes = nlohmann::json::object();
    std::string tool_version;
    std::string started_at;
    std::string finished_at;

    [[nodiscard]] nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& doc);
};

/// Library version string.
const char* version();

/// ISO-8601 UTC time, second resolution.
std::string utc_timestamp();

void write_run_manifest(const std::filesystem::path& run_dir, const RunManifest& m);
RunManifest read_run_manifest(const std::filesystem::path& run_dir_or_file);

}  // namespace nste
