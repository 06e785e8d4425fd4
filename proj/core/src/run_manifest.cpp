#include "nste/run_manifest.hpp"

#include "nste/errors.hpp"
#include "nste/training.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#ifndef NSTE_VERSION
#define NSTE_VERSION "0.0.0"
#endif

namespace nste {

const char* version() { return NSTE_VERSION; }

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json RunManifest::to_json() const {
    return {{"subcommand", subcommand},   {"config", config},         {"seeds", seeds},
            {"input_hashes", input_hashes}, {"tool_version", tool_version}, {"started_at", started_at},
            {"finished_at", finished_at}};
}

RunManifest RunManifest::from_json(const nlohmann::json& doc) {
    RunManifest m;
    try {
        m.subcommand = doc.at("subcommand").get<std::string>();
        m.config = doc.at("config");
        m.seeds = doc.value("seeds", nlohmann::json::object());
        m.input_hashes = doc.value("input_hashes", nlohmann::json::object());
        m.tool_version = doc.value("tool_version", "");
        m.started_at = doc.value("started_at", "");
        m.finished_at = doc.value("finished_at", "");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("run manifest: ") + e.what());
    }
    return m;
}

void write_run_manifest(const std::filesystem::path& run_dir, const RunManifest& m) {
    std::filesystem::create_directories(run_dir);
    write_text(run_dir / kRunManifestName, m.to_json().dump(2) + "\n");
}

RunManifest read_run_manifest(const std::filesystem::path& path) {
    const auto file = std::filesystem::is_directory(path) ? path / kRunManifestName : path;
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read run manifest " + file.string());
    try {
        return RunManifest::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

}  // namespace nste
