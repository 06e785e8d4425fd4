#include "nste/report.hpp"

#include "nste/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace nste {

ImagePlane make_grid(const std::vector<std::vector<ImagePlane>>& rows, Size cell, int pad) {
    if (rows.empty()) throw std::invalid_argument("make_grid: no rows");
    std::size_t cols = 0;
    for (const auto& r : rows) cols = std::max(cols, r.size());
    if (cols == 0) throw std::invalid_argument("make_grid: empty rows");
    const int W = static_cast<int>(cols) * (cell.width + pad) + pad;
    const int H = static_cast<int>(rows.size()) * (cell.height + pad) + pad;
    ImagePlane out(H, W, 1.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            const ImagePlane tile = rows[r][c].size() == cell ? rows[r][c] : resize_bilinear(rows[r][c], cell);
            const int y0 = pad + static_cast<int>(r) * (cell.height + pad);
            const int x0 = pad + static_cast<int>(c) * (cell.width + pad);
            for (int k = 0; k < kChannels; ++k)
                for (int y = 0; y < cell.height; ++y)
                    for (int x = 0; x < cell.width; ++x) out.at(k, y0 + y, x0 + x) = tile.at(k, y, x);
        }
    }
    out.clip01();
    return out;
}

std::string format_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::vector<std::string> metric_cells(const MetricsTriple& m) {
    return {format_fixed(m.psnr), format_fixed(m.rmse), format_fixed(m.ssim)};
}

std::string markdown_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream os;
    os << '|';
    for (const auto& h : header) os << ' ' << h << " |";
    os << "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) os << (i == 0 ? "---|" : "---:|");
    os << '\n';
    for (const auto& r : rows) {
        os << '|';
        for (const auto& c : r) os << ' ' << c << " |";
        os << '\n';
    }
    return os.str();
}

namespace {

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<ChartSeries>& series, std::optional<double> reference) {
    const double W = 480, H = 320, ml = 60, mr = 120, mt = 30, mb = 45;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw std::invalid_argument("svg_line_chart: x/y length mismatch");
        for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
        for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
    }
    if (reference) y0 = std::min(y0, *reference), y1 = std::max(y1, *reference);
    if (x0 > x1) x0 = 0, x1 = 1;
    if (y0 > y1) y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double pad_y = 0.05 * (y1 - y0);
    y0 -= pad_y;
    y1 += pad_y;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << escape_xml(title) << "</text>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
        os << "<text x=\"" << px(xv) << "\" y=\"" << H - mb + 14 << "\" text-anchor=\"middle\">" << format_fixed(xv, 2) << "</text>\n";
        os << "<text x=\"" << ml - 5 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << format_fixed(yv, 3) << "</text>\n";
    }
    os << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\">" << escape_xml(x_label) << "</text>\n";
    os << "<text transform=\"translate(14," << (mt + H - mb) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << escape_xml(y_label) << "</text>\n";
    if (reference) {
        os << "<line x1=\"" << ml << "\" y1=\"" << py(*reference) << "\" x2=\"" << W - mr << "\" y2=\"" << py(*reference)
           << "\" stroke=\"gray\" stroke-dasharray=\"4,3\"/>\n";
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const char* color = kPalette[i % std::size(kPalette)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t k = 0; k < s.x.size(); ++k) os << px(s.x[k]) << ',' << py(s.y[k]) << ' ';
        os << "\"/>\n";
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            os << "<circle cx=\"" << px(s.x[k]) << "\" cy=\"" << py(s.y[k]) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        os << "<text x=\"" << W - mr + 8 << "\" y=\"" << mt + 14 * (i + 1) << "\" fill=\"" << color << "\">" << escape_xml(s.name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace nste
