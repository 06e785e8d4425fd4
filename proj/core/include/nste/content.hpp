#pragma once

#include "nste/image.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace nste {

/// Procedural stand-in for printed documents: a two-color gradient page with
/// texture patches, filled shapes and lines of bitmap text.
struct ContentSpec {
    Size size{64, 64};
    int min_shapes = 2, max_shapes = 4;
    int min_patches = 1, max_patches = 3;
    int min_text_lines = 1, max_text_lines = 3;
    /// Smooth color texture under everything: lattice cells per side and amplitude.
    int texture_cells = 8;
    double texture_strength = 0.3;

    [[nodiscard]] nlohmann::json to_json() const;
    static ContentSpec from_json(const nlohmann::json& doc);

    friend bool operator==(const ContentSpec&, const ContentSpec&) = default;
};

/// Seed of image `index` in a corpus generated from `seed`.
std::uint64_t content_seed(std::uint64_t seed, std::uint64_t index);

ImagePlane generate_content_image(const ContentSpec& spec, std::uint64_t image_seed);

/// n images; image i is generate_content_image(spec, content_seed(seed, i)).
std::vector<ImagePlane> generate_content(int n, const ContentSpec& spec, std::uint64_t seed);

/// Draws text with the built-in 5x7 font (A-Z, 0-9, space) at integer scale.
void draw_text(ImagePlane& img, const std::string& text, int x, int y, int scale, const std::array<double, 3>& color);

}  // namespace nste
