#include "nste/content.hpp"

#include "nste/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace nste {

namespace {

// 5x7 glyphs, one byte per row, bit 4 = leftmost column.
struct Glyph {
    char ch;
    std::array<std::uint8_t, 7> rows;
};

constexpr Glyph kFont[] = {
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
};

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

const Glyph* find_glyph(char c) {
    for (const auto& g : kFont)
        if (g.ch == c) return &g;
    return nullptr;
}

using Color = std::array<double, 3>;

class Painter {
public:
    explicit Painter(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    Color color() { return {uniform(0, 1), uniform(0, 1), uniform(0, 1)}; }
    /// Color at least `min_dist` (max-channel) from `ref`.
    Color contrasting(const Color& ref, double min_dist) {
        for (int attempt = 0; attempt < 64; ++attempt) {
            Color c = color();
            double d = 0;
            for (int k = 0; k < 3; ++k) d = std::max(d, std::abs(c[k] - ref[k]));
            if (d >= min_dist) return c;
        }
        return {1.0 - std::round(ref[0]), 1.0 - std::round(ref[1]), 1.0 - std::round(ref[2])};
    }
    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
};

void blend(ImagePlane& img, int y, int x, const Color& c, double alpha = 1.0) {
    if (y < 0 || x < 0 || y >= img.height() || x >= img.width()) return;
    for (int k = 0; k < kChannels; ++k) img.at(k, y, x) = (1.0 - alpha) * img.at(k, y, x) + alpha * c[k];
}

Color sample(const ImagePlane& img, int y, int x) {
    y = std::clamp(y, 0, img.height() - 1);
    x = std::clamp(x, 0, img.width() - 1);
    return {img.at(0, y, x), img.at(1, y, x), img.at(2, y, x)};
}

void draw_shape(ImagePlane& img, Painter& p) {
    const int w = img.width(), h = img.height();
    const int kind = p.integer(0, 3);
    const double cx = p.uniform(0.1, 0.9) * w, cy = p.uniform(0.1, 0.9) * h;
    const double r = p.uniform(0.08, 0.25) * std::min(w, h);
    const Color col = p.contrasting(sample(img, static_cast<int>(cy), static_cast<int>(cx)), 0.4);
    const double angle = p.uniform(0.0, std::numbers::pi);
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double aspect = p.uniform(0.4, 1.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double u = ca * dx + sa * dy, v = -sa * dx + ca * dy;
            bool inside = false;
            switch (kind) {
                case 0: inside = u * u + (v / aspect) * (v / aspect) <= r * r; break;         // ellipse
                case 1: inside = std::abs(u) <= r && std::abs(v) <= r * aspect; break;          // rectangle
                case 2: inside = v <= r * 0.5 && v >= -r && std::abs(u) <= (r * 0.5 - v) * 0.6; break;  // triangle
                default: {                                                                        // ring
                    const double d = std::sqrt(u * u + v * v);
                    inside = d <= r && d >= r * 0.6;
                }
            }
            if (inside) blend(img, y, x, col);
        }
    }
}

void draw_patch(ImagePlane& img, Painter& p) {
    const int w = img.width(), h = img.height();
    const int pw = std::max(4, static_cast<int>(p.uniform(0.2, 0.45) * w));
    const int ph = std::max(4, static_cast<int>(p.uniform(0.2, 0.45) * h));
    const int x0 = p.integer(0, w - pw), y0 = p.integer(0, h - ph);
    const Color a = p.color();
    const Color b = p.contrasting(a, 0.35);
    const int kind = p.integer(0, 2);
    const double period = p.uniform(2.5, 6.0);
    const double angle = p.uniform(0.0, std::numbers::pi);
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int y = y0; y < y0 + ph; ++y) {
        for (int x = x0; x < x0 + pw; ++x) {
            double m = 0.0;
            if (kind == 0) {  // stripes
                m = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (ca * x + sa * y) / period);
            } else if (kind == 1) {  // checkerboard
                const int cell = static_cast<int>(period);
                m = (((x - x0) / cell + (y - y0) / cell) % 2) ? 1.0 : 0.0;
            } else {  // speckle
                m = p.uniform(0.0, 1.0);
            }
            Color c;
            for (int k = 0; k < 3; ++k) c[k] = (1.0 - m) * a[k] + m * b[k];
            blend(img, y, x, c);
        }
    }
}

/// Smooth colored value noise on a cells x cells lattice, so that no region of
/// the print is flat (like a photographic color print).
void add_print_texture(ImagePlane& img, Painter& p, int cells, double strength) {
    if (strength <= 0.0) return;
    const int w = img.width(), h = img.height();
    const int n = cells + 1;
    std::vector<double> lattice(static_cast<std::size_t>(kChannels) * n * n);
    for (double& v : lattice) v = p.uniform(-1.0, 1.0);
    auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
    for (int y = 0; y < h; ++y) {
        const double fy = (y + 0.5) / h * cells;
        const int iy = std::min(static_cast<int>(fy), cells - 1);
        const double ty = smooth(fy - iy);
        for (int x = 0; x < w; ++x) {
            const double fx = (x + 0.5) / w * cells;
            const int ix = std::min(static_cast<int>(fx), cells - 1);
            const double tx = smooth(fx - ix);
            for (int k = 0; k < kChannels; ++k) {
                const double* L = lattice.data() + static_cast<std::size_t>(k) * n * n;
                const double a = L[iy * n + ix] * (1 - tx) + L[iy * n + ix + 1] * tx;
                const double b = L[(iy + 1) * n + ix] * (1 - tx) + L[(iy + 1) * n + ix + 1] * tx;
                img.at(k, y, x) += strength * (a * (1 - ty) + b * ty);
            }
        }
    }
    img.clip01();
}

void draw_text_line(ImagePlane& img, Painter& p) {
    const int w = img.width(), h = img.height();
    const int scale = std::max(1, std::min(w, h) / 48 + p.integer(0, 1));
    const int glyph_w = 6 * scale;
    const int max_chars = std::max(1, (w - 2) / glyph_w);
    const int n = p.integer(std::min(3, max_chars), max_chars);
    std::string text;
    for (int i = 0; i < n; ++i) {
        text += (p.integer(0, 5) == 0 && i > 0 && i + 1 < n) ? ' ' : kAlphabet[p.integer(0, 35)];
    }
    const int x = p.integer(0, std::max(0, w - n * glyph_w));
    const int y = p.integer(0, std::max(0, h - 7 * scale));
    const Color col = p.contrasting(sample(img, y + 3 * scale, x + n * glyph_w / 2), 0.45);
    draw_text(img, text, x, y, scale, col);
}

}  // namespace

nlohmann::json ContentSpec::to_json() const {
    return {{"width", size.width},         {"height", size.height},           {"min_shapes", min_shapes},
            {"max_shapes", max_shapes},    {"min_patches", min_patches},      {"max_patches", max_patches},
            {"min_text_lines", min_text_lines}, {"max_text_lines", max_text_lines},
            {"texture_cells", texture_cells}, {"texture_strength", texture_strength}};
}

ContentSpec ContentSpec::from_json(const nlohmann::json& doc) {
    ContentSpec s;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "width") s.size.width = value.get<int>();
            else if (key == "height") s.size.height = value.get<int>();
            else if (key == "min_shapes") s.min_shapes = value.get<int>();
            else if (key == "max_shapes") s.max_shapes = value.get<int>();
            else if (key == "min_patches") s.min_patches = value.get<int>();
            else if (key == "max_patches") s.max_patches = value.get<int>();
            else if (key == "min_text_lines") s.min_text_lines = value.get<int>();
            else if (key == "max_text_lines") s.max_text_lines = value.get<int>();
            else if (key == "texture_cells") s.texture_cells = value.get<int>();
            else if (key == "texture_strength") s.texture_strength = value.get<double>();
            else throw ConfigError("content spec: unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("content spec: ") + e.what());
    }
    return s;
}

std::uint64_t content_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 of (seed, index)
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void draw_text(ImagePlane& img, const std::string& text, int x, int y, int scale, const std::array<double, 3>& color) {
    int pen = x;
    for (char ch : text) {
        if (const Glyph* g = find_glyph(ch)) {
            for (int r = 0; r < 7; ++r)
                for (int col = 0; col < 5; ++col)
                    if (g->rows[r] & (0x10 >> col))
                        for (int sy = 0; sy < scale; ++sy)
                            for (int sx = 0; sx < scale; ++sx)
                                blend(img, y + r * scale + sy, pen + col * scale + sx, color);
        }
        pen += 6 * scale;
    }
}

ImagePlane generate_content_image(const ContentSpec& spec, std::uint64_t image_seed) {
    if (spec.size.width < kMinImageSide || spec.size.height < kMinImageSide) {
        throw DimensionMismatch("content: resolution must be at least 8x8");
    }
    if (spec.min_shapes < 0 || spec.max_shapes < spec.min_shapes || spec.min_patches < 0 ||
        spec.max_patches < spec.min_patches || spec.min_text_lines < 0 || spec.max_text_lines < spec.min_text_lines) {
        throw ConfigError("content spec: element count ranges must satisfy 0 <= min <= max");
    }
    if (spec.texture_cells < 1 || spec.texture_strength < 0.0) {
        throw ConfigError("content spec: texture_cells >= 1 and texture_strength >= 0 required");
    }
    Painter p(image_seed);
    const int w = spec.size.width, h = spec.size.height;
    ImagePlane img(h, w);

    // Background gradient between two distinct colors along a random direction.
    const Color c0 = p.color();
    const Color c1 = p.contrasting(c0, 0.3);
    const double angle = p.uniform(0.0, 2.0 * std::numbers::pi);
    const double gx = std::cos(angle), gy = std::sin(angle);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double t = std::clamp(0.5 + ((x + 0.5) / w - 0.5) * gx + ((y + 0.5) / h - 0.5) * gy, 0.0, 1.0);
            for (int k = 0; k < 3; ++k) img.at(k, y, x) = (1.0 - t) * c0[k] + t * c1[k];
        }
    }
    add_print_texture(img, p, spec.texture_cells, spec.texture_strength);
    const int patches = p.integer(spec.min_patches, spec.max_patches);
    for (int i = 0; i < patches; ++i) draw_patch(img, p);
    const int shapes = p.integer(spec.min_shapes, spec.max_shapes);
    for (int i = 0; i < shapes; ++i) draw_shape(img, p);
    const int lines = p.integer(spec.min_text_lines, spec.max_text_lines);
    for (int i = 0; i < lines; ++i) draw_text_line(img, p);
    img.clip01();
    return img;
}

std::vector<ImagePlane> generate_content(int n, const ContentSpec& spec, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_content: n must be >= 1");
    std::vector<ImagePlane> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(generate_content_image(spec, content_seed(seed, static_cast<std::uint64_t>(i))));
    return out;
}

}  // namespace nste
