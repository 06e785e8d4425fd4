#include "nste/report.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace nste;

TEST(Grid, LayoutAndPadding) {
    const ImagePlane black(8, 8, 0.0);
    const auto g = make_grid({{black, black, black}, {black}}, {8, 8}, 2);
    EXPECT_EQ(g.width(), 3 * 10 + 2);
    EXPECT_EQ(g.height(), 2 * 10 + 2);
    EXPECT_EQ(g.at(0, 0, 0), 1.0);        // padding
    EXPECT_EQ(g.at(0, 2, 2), 0.0);        // first tile
    EXPECT_EQ(g.at(1, 15, 25), 1.0);      // missing tile in short row stays white
    const auto resized = make_grid({{test::random_image(16, 20, 1)}}, {8, 8});
    EXPECT_EQ(resized.width(), 12);
    EXPECT_THROW(make_grid({}, {8, 8}), std::invalid_argument);
}

TEST(Chart, ContainsSeriesAndReference) {
    const auto svg = svg_line_chart("SSIM <vs> k", "k_A", "SSIM", {{"baseline", {0.3, 0.6, 1.0}, {0.6, 0.5, 0.3}}}, 0.35);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("SSIM &lt;vs&gt; k"), std::string::npos);
    EXPECT_NE(svg.find("<polyline"), std::string::npos);
    EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
    EXPECT_EQ(std::count(svg.begin(), svg.end(), '\n') > 5, true);
    EXPECT_THROW(svg_line_chart("t", "x", "y", {{"bad", {1, 2}, {1}}}), std::invalid_argument);
}

TEST(Table, MarkdownFormatting) {
    const auto t = markdown_table({"setup", "psnr"}, {{"easy", format_fixed(15.02749, 2)}});
    EXPECT_EQ(t, "| setup | psnr |\n|---|---:|\n| easy | 15.03 |\n");
    EXPECT_EQ(metric_cells({15.0, 0.25, 0.5}), (std::vector<std::string>{"15.0000", "0.2500", "0.5000"}));
}
