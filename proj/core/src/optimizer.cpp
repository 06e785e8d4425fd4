#include "nste/optimizer.hpp"

#include "nste/errors.hpp"

#include "denormals.hpp"

#include <cmath>

namespace nste {

Adam::Adam(const nn::ParamSet& params, AdamConfig config)
    : config_(config), m_(params.zeros_like()), v_(params.zeros_like()) {}

void Adam::step(nn::ParamSet& params, const nn::GradSet& grads) {
    const detail::FlushDenormals ftz;
    if (grads.size() != params.tensors.size() || m_.size() != params.tensors.size()) {
        throw DimensionMismatch("adam: gradient layout does not match parameters");
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    const auto b1 = static_cast<float>(config_.beta1), b2 = static_cast<float>(config_.beta2);
    const auto wd = static_cast<float>(config_.weight_decay);
    const auto step_size = static_cast<float>(config_.lr / bc1);
    const auto inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
    const auto eps = static_cast<float>(config_.eps);
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
        auto& w = params.tensors[t].values;
        const auto& g = grads[t];
        auto& m = m_[t];
        auto& v = v_[t];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const float gi = g[i] + wd * w[i];
            m[i] = b1 * m[i] + (1.0f - b1) * gi;
            v[i] = b2 * v[i] + (1.0f - b2) * gi * gi;
            w[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
        }
    }
}

void Adam::restore(std::vector<std::vector<float>> m, std::vector<std::vector<float>> v, std::int64_t steps) {
    if (m.size() != m_.size() || v.size() != v_.size()) throw DimensionMismatch("adam: restored state layout mismatch");
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i].size() != m_[i].size() || v[i].size() != v_[i].size()) {
            throw DimensionMismatch("adam: restored moment size mismatch");
        }
    }
    m_ = std::move(m);
    v_ = std::move(v);
    step_ = steps;
}

}  // namespace nste
