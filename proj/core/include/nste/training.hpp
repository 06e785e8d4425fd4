#pragma once

#include "nste/metrics.hpp"
#include "nste/model.hpp"
#include "nste/optimizer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nste {

struct LossWeights {
    double recon = 1.0;
    double j_constraint = 1.0;
    double a_constraint = 0.1;

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 5e-4;
    int iterations = 4000;
    int batch_size = 16;
    std::uint64_t seed = 0;
    ModelVariant variant = ModelVariant::full;
    LossWeights loss_weights;
    int checkpoint_interval = 500;

    [[nodiscard]] nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& doc, const TrainConfig& base);
    static TrainConfig from_json(const nlohmann::json& doc);
    /// sha256 of the canonical JSON form.
    [[nodiscard]] std::string hash() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Weighted loss contributions; total == recon + j_term + a_term.
struct LossBreakdown {
    double total = 0.0;
    double recon = 0.0;
    double j_term = 0.0;
    double a_term = 0.0;
};

/// L = w_r (mean|J - J_hat| + 1 - SSIM) + w_j mean (J - J_coarse)^2
///     + w_a mean (A - T(I))^2, with the terms the variant drops set to zero.
LossBreakdown total_loss(const ForwardTrace& trace, const ImagePlane& J, const LossWeights& weights,
                         ModelVariant variant);

struct PairedSample {
    std::string id;
    ImagePlane captured;
    ImagePlane target;
    /// Ground-truth pose (content -> capture pixels) when known.
    std::optional<Homography> pose;
};

struct LossHistory {
    std::vector<LossBreakdown> per_iteration;

    /// Trailing moving average of the total loss ending at `iteration` (1-based).
    [[nodiscard]] double smoothed_total(int iteration, int window = 100) const;
    [[nodiscard]] std::string to_csv() const;
};

struct TrainState {
    ModelParameters params;
    Adam optimizer;
    int iteration = 0;
    LossHistory loss_history;
};

struct TrainOptions {
    /// When set, checkpoints and loss.csv are written here.
    std::optional<std::filesystem::path> run_dir;
    /// Called after each iteration with (iteration, losses).
    std::function<void(int, const LossBreakdown&)> on_iteration;
    /// Invariant hook: receives the cache of every sample seen during training.
    std::function<void(int, const SampleCache&)> on_sample;
    /// Initial parameters (e.g. resume); default is a fresh seeded init.
    std::optional<ModelParameters> initial;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, int iteration, std::string last_checkpoint)
        : std::runtime_error(what), iteration_(iteration), last_checkpoint_(std::move(last_checkpoint)) {}
    [[nodiscard]] int iteration() const { return iteration_; }
    [[nodiscard]] const std::string& last_checkpoint() const { return last_checkpoint_; }

private:
    int iteration_;
    std::string last_checkpoint_;
};

/// Model geometry implied by a dataset (content = target size, capture = input size).
ModelGeometry geometry_for(std::span<const PairedSample> data);

/// Adam on seeded, epoch-shuffled mini-batches for exactly config.iterations steps.
TrainState train(std::span<const PairedSample> dataset, const TrainConfig& config, const TrainOptions& options = {});

/// Gradient of the mean training loss over `batch` with respect to all
/// parameters (no update); returns the loss.
LossBreakdown loss_and_gradient(const NeuralSte& net, const ModelParameters& params,
                                std::span<const PairedSample* const> batch, const LossWeights& weights,
                                nn::GradSet& grads);

struct ImageMetrics {
    std::string id;
    MetricsTriple model;
    MetricsTriple baseline;
};

struct MetricsReport {
    std::string variant;
    std::vector<ImageMetrics> rows;
    MetricsTriple mean_model;
    MetricsTriple mean_baseline;
    nlohmann::json metadata = nlohmann::json::object();

    [[nodiscard]] nlohmann::json to_json() const;
    /// One line per image plus a final "mean" aggregate row.
    [[nodiscard]] std::string to_csv() const;
};

/// Metrics of arbitrary predictions; baseline images are scored the same way.
MetricsReport evaluate_predictions(std::span<const std::string> ids, std::span<const ImagePlane> predictions,
                                   std::span<const ImagePlane> baselines, std::span<const ImagePlane> targets);

/// Scores J_hat vs J and the warped input T(I) vs J (the captured-image row).
MetricsReport evaluate(const ModelParameters& params, ModelVariant variant, std::span<const PairedSample> test_set);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace nste
