#include "nste/envelope_config.hpp"

#include "nste/errors.hpp"
#include "nste/imaging.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace nste {

namespace {

// Sum of random low-frequency cosines plus blurred fiber noise, rescaled to
// [lo, hi] per channel.
ImagePlane smooth_field(Size size, std::uint64_t seed, double lo, double hi, double fiber_weight) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    ImagePlane fibers(size.height, size.width);
    for (double& v : fibers.data()) v = normal(rng);
    BlurSpec fiber_blur;
    fiber_blur.kernel_size = 3;
    fibers = apply_blur(fibers, fiber_blur);

    ImagePlane out(size.height, size.width);
    for (int c = 0; c < kChannels; ++c) {
        struct Wave {
            double fx, fy, phase, amp;
        };
        std::vector<Wave> waves(4);
        for (auto& w : waves) {
            w = {unit(rng) * 3.0, unit(rng) * 3.0, unit(rng) * 2.0 * std::numbers::pi, 0.5 + unit(rng)};
        }
        double mn = 1e30, mx = -1e30;
        for (int y = 0; y < size.height; ++y) {
            for (int x = 0; x < size.width; ++x) {
                const double u = static_cast<double>(x) / size.width, v = static_cast<double>(y) / size.height;
                double s = 0.0;
                for (const auto& w : waves) s += w.amp * std::cos(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.phase);
                s += fiber_weight * fibers.at(c, y, x);
                out.at(c, y, x) = s;
                mn = std::min(mn, s);
                mx = std::max(mx, s);
            }
        }
        const double span = mx > mn ? mx - mn : 1.0;
        for (double& v : out.channel(c)) v = lo + (hi - lo) * (v - mn) / span;
    }
    return out;
}

template <typename T>
T get_as(const nlohmann::json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("envelope config: key '" + key + "' has the wrong type (" + e.what() + ")");
    }
}

}  // namespace

ImagePlane envelope_transmittance_texture(Size size, std::uint64_t seed) {
    return smooth_field(size, seed * 2 + 1, 0.8, 1.0, 0.6);
}

ImagePlane envelope_reflectance_texture(Size size, std::uint64_t seed) {
    ImagePlane field = smooth_field(size, seed * 2 + 2, 0.0, 1.0, 0.8);
    static constexpr std::array<double, 3> tint{0.80, 0.74, 0.62};
    for (int c = 0; c < kChannels; ++c)
        for (double& v : field.channel(c)) v = std::clamp(tint[c] + 0.2 * (v - 0.5), 0.0, 1.0);
    return field;
}

std::string to_string(TextureKind kind) { return kind == TextureKind::paper ? "paper" : "uniform"; }

TextureKind texture_kind_from_string(const std::string& s) {
    if (s == "paper") return TextureKind::paper;
    if (s == "uniform") return TextureKind::uniform;
    throw ConfigError("envelope config: texture.kind must be 'paper' or 'uniform', got '" + s + "'");
}

nlohmann::json EnvelopeConfig::to_json() const {
    nlohmann::json j;
    j["L"] = L;
    j["homography"] = homography;
    j["blur.kernel_size"] = kernel_size;
    j["blur.sigma"] = sigma;
    j["k_t"] = k_t;
    j["k_A"] = k_A;
    j["noise.gaussian_sigma"] = gaussian_sigma;
    j["noise.poisson_scale"] = poisson_scale;
    j["seed"] = seed;
    j["texture.kind"] = to_string(texture);
    j["texture.seed"] = texture_seed;
    return j;
}

EnvelopeConfig EnvelopeConfig::from_json(const nlohmann::json& doc) { return from_json(doc, EnvelopeConfig{}); }

EnvelopeConfig EnvelopeConfig::from_json(const nlohmann::json& doc, const EnvelopeConfig& base) {
    if (!doc.is_object()) throw ConfigError("envelope config: expected a flat key-value object");
    static const std::set<std::string> known{"L",        "homography", "blur.kernel_size",     "blur.sigma",
                                             "k_t",      "k_A",        "noise.gaussian_sigma", "noise.poisson_scale",
                                             "seed",     "texture.kind", "texture.seed"};
    EnvelopeConfig c = base;
    for (const auto& [key, value] : doc.items()) {
        if (!known.contains(key)) throw ConfigError("envelope config: unknown key '" + key + "'");
        if (key == "L") c.L = get_as<double>(value, key);
        else if (key == "homography") {
            const auto h = get_as<std::vector<double>>(value, key);
            if (h.size() != 8) throw ConfigError("envelope config: homography needs 8 row-major values (h33 omitted)");
            std::copy(h.begin(), h.end(), c.homography.begin());
        } else if (key == "blur.kernel_size") c.kernel_size = get_as<int>(value, key);
        else if (key == "blur.sigma") c.sigma = get_as<double>(value, key);
        else if (key == "k_t") c.k_t = get_as<double>(value, key);
        else if (key == "k_A") c.k_A = get_as<double>(value, key);
        else if (key == "noise.gaussian_sigma") c.gaussian_sigma = get_as<double>(value, key);
        else if (key == "noise.poisson_scale") c.poisson_scale = get_as<double>(value, key);
        else if (key == "seed") c.seed = get_as<std::uint64_t>(value, key);
        else if (key == "texture.kind") c.texture = texture_kind_from_string(get_as<std::string>(value, key));
        else if (key == "texture.seed") c.texture_seed = get_as<std::uint64_t>(value, key);
    }
    return c;
}

EnvelopeParams EnvelopeConfig::realize(Size content) const {
    EnvelopeParams p;
    p.L = L;
    p.H = Homography::from_params(homography);
    p.blur.kernel_size = kernel_size;
    p.blur.sigma = sigma;
    p.k_t = k_t;
    p.k_A = k_A;
    p.noise = {gaussian_sigma, poisson_scale, seed};
    if (texture == TextureKind::paper) {
        p.t_base = envelope_transmittance_texture(content, texture_seed);
        p.A_base = envelope_reflectance_texture(content, texture_seed);
    } else {
        p.t_base = ImagePlane(content.height, content.width, 1.0);
        p.A_base = ImagePlane(content.height, content.width, 1.0);
    }
    p.validate();
    return p;
}

}  // namespace nste
