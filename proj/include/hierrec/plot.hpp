#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace hierrec {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
};

/// Renders a line chart as a standalone SVG document.
std::string render_svg(const PlotSpec& spec);
void write_svg(const std::filesystem::path& path, const PlotSpec& spec);

/// Trailing moving average with a window of `window` points (shorter at the start).
std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window);

}  // namespace hierrec
