#pragma once

#include "pclab/matrix.hpp"

#include <string>
#include <vector>

namespace pclab::svg {

struct Style {
    double width = 480;
    double height = 360;
    std::string title;
    std::string x_label;
    std::string y_label;
    /// Emit a generation-time comment; off for byte-stable output.
    bool timestamp = true;
};

/// Points colored by value on a viridis-like ramp. Each point is a
/// <circle class="point">.
std::string scatter(const std::vector<double>& x, const std::vector<double>& y,
                    const std::vector<double>& color, const Style& style);

struct BarGroup {
    std::string label;
    std::vector<double> values;  ///< one per series
};

std::string grouped_bars(const std::vector<BarGroup>& groups,
                         const std::vector<std::string>& series_names, const Style& style);

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> err;  ///< optional symmetric error bars
};

/// Polyline per series with optional error bars. When fit_slope is set, a
/// dashed <line class="fit"> y = slope * x + intercept is drawn.
std::string line_chart(const std::vector<Series>& series, const Style& style,
                       const double* fit_slope = nullptr, const double* fit_intercept = nullptr);

/// Square cells shaded by value (min..max on the color ramp).
std::string heatmap(const Matrix& m, const Style& style);

/// Hex color for t in [0, 1].
std::string ramp_color(double t);

}  // namespace pclab::svg
