#pragma once

#include "nste/image.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <string>

namespace nste {

enum class TextureKind { paper, uniform };

/// Flat key-value description of a simulated envelope. Textures are not stored
/// pixel by pixel; they are regenerated from texture.kind and texture.seed.
struct EnvelopeConfig {
    double L = 1.0;
    std::array<double, 8> homography{1, 0, 0, 0, 1, 0, 0, 0};
    int kernel_size = 1;
    double sigma = 0.0;
    double k_t = 1.0;
    double k_A = 0.0;
    double gaussian_sigma = 0.0;
    double poisson_scale = 0.0;
    std::uint64_t seed = 0;
    TextureKind texture = TextureKind::paper;
    std::uint64_t texture_seed = 7;

    /// Keys: L, homography, blur.kernel_size, blur.sigma, k_t, k_A,
    /// noise.gaussian_sigma, noise.poisson_scale, seed, texture.kind, texture.seed.
    [[nodiscard]] nlohmann::json to_json() const;
    /// Unknown keys and wrong types are rejected with ConfigError. Missing keys
    /// keep the values already present in `base`.
    static EnvelopeConfig from_json(const nlohmann::json& doc, const EnvelopeConfig& base);
    static EnvelopeConfig from_json(const nlohmann::json& doc);

    /// Realizes textures at the content resolution and validates ranges.
    [[nodiscard]] EnvelopeParams realize(Size content) const;

    friend bool operator==(const EnvelopeConfig&, const EnvelopeConfig&) = default;
};

/// Unit transmittance texture (values in [0.8, 1]) and unit reflectance
/// texture (paper tint with fibers) for an envelope surface.
ImagePlane envelope_transmittance_texture(Size size, std::uint64_t seed);
ImagePlane envelope_reflectance_texture(Size size, std::uint64_t seed);

std::string to_string(TextureKind kind);
TextureKind texture_kind_from_string(const std::string& s);

}  // namespace nste
