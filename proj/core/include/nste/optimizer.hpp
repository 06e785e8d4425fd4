#pragma once

#include "nste/nn/tensor.hpp"

#include <cstdint>
#include <vector>

namespace nste {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// L2 penalty added to the gradient (PyTorch Adam's weight_decay).
    double weight_decay = 5e-4;
};

class Adam {
public:
    Adam() = default;
    Adam(const nn::ParamSet& params, AdamConfig config);

    /// One update. grads are consumed as-is (already averaged over the batch).
    void step(nn::ParamSet& params, const nn::GradSet& grads);

    [[nodiscard]] const AdamConfig& config() const { return config_; }
    [[nodiscard]] std::int64_t steps() const { return step_; }
    [[nodiscard]] const std::vector<std::vector<float>>& first_moment() const { return m_; }
    [[nodiscard]] const std::vector<std::vector<float>>& second_moment() const { return v_; }

    /// Restores moments from a checkpoint; shapes must match the parameters.
    void restore(std::vector<std::vector<float>> m, std::vector<std::vector<float>> v, std::int64_t steps);

private:
    AdamConfig config_;
    std::vector<std::vector<float>> m_, v_;
    std::int64_t step_ = 0;
};

}  // namespace nste
