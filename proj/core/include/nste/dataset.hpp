#pragma once

#include "nste/content.hpp"
#include "nste/envelope_config.hpp"
#include "nste/training.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nste {

/// Content / capture resolution pairs. `desk` is the reduced default used for
/// single-core runs; `paper` matches the 320x240 camera resolution.
enum class Resolution { desk, paper };

std::string to_string(Resolution r);
Resolution resolution_from_string(const std::string& s);
Size content_size(Resolution r);
Size capture_size(Resolution r);

/// Named envelope presets: easy, medium, hard, paper-safe, identity.
const std::vector<std::string>& preset_names();
/// Optical parameters of a preset; the pose is left at the identity.
EnvelopeConfig preset_envelope(const std::string& preset);

/// Places the content page centered in the capture, filling 80% of the
/// shorter capture side (content pixels -> capture pixels).
Homography base_pose(Size content, Size capture);

struct DatasetManifest {
    std::string setup_id;
    std::string preset;  ///< informational
    EnvelopeConfig envelope;
    ContentSpec content;
    std::uint64_t content_seed = 0;
    Size capture{160, 120};
    int pair_count = 500;
    /// Corner displacement, uniform in +-pose_jitter * capture size per pair.
    double pose_jitter = 0.05;
    std::vector<std::uint64_t> pair_seeds;
    std::vector<int> train_indices;
    std::vector<int> test_indices;

    [[nodiscard]] nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& doc);
    /// Throws ConfigError on inconsistent counts, splits or seeds.
    void validate() const;

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Manifest for a preset with seeded per-pair seeds and a seeded 90/10 split.
DatasetManifest make_manifest(const std::string& preset, Resolution res, std::uint64_t seed, int pairs = 500,
                              const std::string& setup_id = "");

/// Manifest for arbitrary optics; the pose is the centered base pose and the
/// homography stored in `optics` is ignored.
DatasetManifest make_manifest_for(const EnvelopeConfig& optics, Resolution res, std::uint64_t seed, int pairs,
                                  const std::string& setup_id, double pose_jitter = 0.05);

/// Ground-truth pose of pair `index` (content pixels -> capture pixels).
Homography pair_pose(const DatasetManifest& m, int index);
/// Envelope realized for pair `index` (jittered pose, per-pair noise seed).
EnvelopeParams pair_envelope(const DatasetManifest& m, int index);
/// Regenerates pair `index` in memory, exactly as build_dataset stores it.
PairedSample simulate_pair(const DatasetManifest& m, int index);

/// Writes <root>/setup_<id>/{manifest.json, split.json, gt/NNNN.png, cap/NNNN.png}.
/// Output is assembled in a temporary sibling directory and moved into place;
/// on failure the partial output is removed. Returns the dataset directory.
std::filesystem::path build_dataset(const DatasetManifest& m, const std::filesystem::path& root);

struct LoadedDataset {
    std::filesystem::path dir;
    std::optional<DatasetManifest> manifest;
    std::vector<PairedSample> train;
    std::vector<PairedSample> test;
};

/// Loads a dataset directory. Without manifest.json (pre-paired real captures)
/// split.json is required and no poses are attached.
LoadedDataset load_dataset(const std::filesystem::path& dir);

/// sha256 over the relative paths and bytes of every file in the dataset.
std::string dataset_hash(const std::filesystem::path& dir);

/// Number of test targets whose content hash also occurs among training targets.
int split_overlap(const LoadedDataset& data);

/// Model-free baseline: the capture registered into the content frame with the
/// true pose.
ImagePlane register_capture(const ImagePlane& captured, const Homography& pose, Size content);

}  // namespace nste
