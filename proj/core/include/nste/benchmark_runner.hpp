#pragma once

#include "nste/dataset.hpp"
#include "nste/metrics.hpp"
#include "nste/model.hpp"
#include "nste/training.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace nste {

/// Reference numbers measured on real envelopes; footer context only, never compared.
inline constexpr MetricsTriple kPaperNeuralSte{15.0275, 0.3127, 0.4449};
inline constexpr MetricsTriple kPaperCamCaptured{8.2767, 0.6682, 0.2695};

class MissingCheckpoint : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SetupResult {
    std::string setup_id;
    MetricsTriple baseline;  ///< unaided capture, no model involved
    std::map<std::string, MetricsTriple> variants;
};

struct BenchmarkReport {
    std::vector<std::string> variants;
    std::vector<SetupResult> setups;
    MetricsTriple baseline_mean;
    std::map<std::string, MetricsTriple> variant_means;

    [[nodiscard]] nlohmann::json to_json() const;
    /// row,psnr,rmse,ssim with one row per variant plus the baseline.
    [[nodiscard]] std::string to_csv() const;
    /// Averaged table, per-setup tables, example grids and the real-data reference footer.
    [[nodiscard]] std::string to_markdown(const std::vector<std::string>& grid_images = {}) const;
};

struct BenchmarkOptions {
    std::filesystem::path out_dir;
    TrainConfig train;  ///< variant field is overridden per run
    /// Checkpoints are looked up at <checkpoint_root>/<setup_id>/<variant>/final.ckpt.
    std::optional<std::filesystem::path> checkpoint_root;
    bool allow_train = true;
};

/// Mean metrics of the registered capture (true pose) against the content.
MetricsTriple baseline_metrics(std::span<const PairedSample> samples, Size content);

/// Evaluates (training when needed and allowed) every variant on every dataset
/// and writes benchmark.{json,csv,md} plus example grids into out_dir.
BenchmarkReport run_benchmark(const std::vector<std::filesystem::path>& datasets,
                              const std::vector<ModelVariant>& variants, const BenchmarkOptions& options);

}  // namespace nste
