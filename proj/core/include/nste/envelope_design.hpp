#pragma once

#include "nste/dataset.hpp"
#include "nste/envelope_config.hpp"
#include "nste/metrics.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nste {

inline constexpr double kDefaultSafetyThreshold = 0.35;

enum class Verdict { safe, unsafe, inconclusive };
std::string to_string(Verdict v);

/// Attack budget of an audit.
struct AuditBudget {
    int pairs = 100;
    int iterations = 1000;
    int batch_size = 16;
    Resolution resolution = Resolution::desk;
    std::uint64_t seed = 0;
    double threshold = kDefaultSafetyThreshold;
    /// When the unaided (registered) capture already reaches the threshold the
    /// envelope is unsafe whatever the attack does, so training is skipped.
    bool skip_training_when_visible = true;

    /// 500 pairs / 4000 iterations at paper resolution.
    static AuditBudget full();

    [[nodiscard]] nlohmann::json to_json() const;
    static AuditBudget from_json(const nlohmann::json& doc);
    /// Throws ConfigError below the smoke-test size (100 pairs, 200 iterations).
    void validate() const;
};

struct SafetyVerdict {
    EnvelopeConfig envelope;
    double pose_jitter = 0.05;
    /// Test-set mean of the stronger attack (trained model or unaided capture).
    MetricsTriple attack_metrics;
    MetricsTriple baseline_metrics;
    std::optional<MetricsTriple> trained_metrics;
    double threshold = kDefaultSafetyThreshold;
    Verdict verdict = Verdict::inconclusive;
    std::string reason;
    std::uint64_t seed = 0;
    std::vector<std::string> evidence;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Generates a dataset for the envelope under `run_dir`, attacks it with the
/// full model, evaluates on the held-out split and classifies the result.
/// Divergence yields Verdict::inconclusive.
SafetyVerdict audit_envelope(const EnvelopeConfig& envelope, const AuditBudget& budget,
                             const std::filesystem::path& run_dir, double pose_jitter = 0.05);

/// Envelope parameters that a sweep axis may vary.
inline const std::vector<std::string> kSweepParameters{"blur.kernel_size", "k_t", "k_A", "L", "pose_jitter",
                                                       "noise.gaussian_sigma"};

struct SweepAxis {
    std::string parameter;
    std::vector<double> levels;
};

struct SweepSpec {
    EnvelopeConfig base;  ///< optics; pose is set from the resolution
    double base_pose_jitter = 0.05;
    std::vector<SweepAxis> axes;

    /// Easy preset with three levels over kernel size, k_t and k_A.
    static SweepSpec nine_setup();
    /// Three levels over every sweepable parameter.
    static SweepSpec five_axis();

    [[nodiscard]] nlohmann::json to_json() const;
    static SweepSpec from_json(const nlohmann::json& doc);
    void validate() const;
};

/// `base` with one parameter changed.
std::pair<EnvelopeConfig, double> apply_sweep_level(const EnvelopeConfig& base, double base_jitter,
                                                    const std::string& parameter, double level);

struct SweepPoint {
    std::string axis;
    double level = 0.0;
    EnvelopeConfig envelope;
    double pose_jitter = 0.05;
    MetricsTriple baseline;  ///< unaided registered capture vs content, test split
    std::optional<SafetyVerdict> verdict;
    std::string error;
};

struct SweepReport {
    std::vector<SweepPoint> points;
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] std::string to_csv() const;
};

struct SweepOptions {
    /// Run a full audit per setup; otherwise only the unaided baseline is measured.
    bool audit = true;
};

/// Per-setup results plus capture strips (PNG) and metric curves (SVG) in out_dir.
/// A failing setup is recorded in its point and the sweep continues.
SweepReport parameter_sweep(const SweepSpec& spec, const AuditBudget& budget, const std::filesystem::path& out_dir,
                            const SweepOptions& options = {});

struct DesignRanges {
    EnvelopeConfig start;  ///< starting optics (clamped into the ranges)
    double k_A_min = 0.0, k_A_max = 1.0;
    double k_t_min = 0.1, k_t_max = 1.0;
    int kernel_min = 1, kernel_max = 17;
    int levels = 3;  ///< grid points per lever

    [[nodiscard]] nlohmann::json to_json() const;
    static DesignRanges from_json(const nlohmann::json& doc);
    void validate() const;
};

struct DesignResult {
    bool found = false;
    EnvelopeConfig design;
    std::optional<SafetyVerdict> verdict;
    std::vector<SafetyVerdict> trail;
    std::string message;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Greedy coordinate descent: raise k_A, then lower k_t, then raise the kernel
/// size, auditing each step and stopping at the first safe design.
DesignResult recommend_design(const DesignRanges& ranges, const AuditBudget& budget,
                              const std::filesystem::path& out_dir);

}  // namespace nste
