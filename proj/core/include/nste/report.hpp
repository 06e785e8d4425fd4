#pragma once

#include "nste/image.hpp"
#include "nste/metrics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nste {

/// Tiles rows of images (each resized to `cell`) on a white canvas with
/// `pad` pixels of spacing.
ImagePlane make_grid(const std::vector<std::vector<ImagePlane>>& rows, Size cell, int pad = 2);

struct ChartSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

/// Static SVG line chart; an optional horizontal reference line (e.g. a threshold).
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<ChartSeries>& series, std::optional<double> reference = std::nullopt);

std::string markdown_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

/// Fixed-precision formatting used in report tables.
std::string format_fixed(double v, int digits = 4);
std::vector<std::string> metric_cells(const MetricsTriple& m);

}  // namespace nste
