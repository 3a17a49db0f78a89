#include "pclab/svg.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <limits>
#include <sstream>

namespace pclab::svg {

namespace {

constexpr double kMarginLeft = 56, kMarginRight = 16, kMarginTop = 32, kMarginBottom = 44;

const std::array<const char*, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c",
                                             "#9467bd", "#ff7f0e", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!std::isfinite(lo)) lo = 0, hi = 1;
        if (hi - lo < 1e-12) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
};

class Canvas {
public:
    explicit Canvas(const Style& s) : style_(s) {
        os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(s.width)
            << "\" height=\"" << num(s.height) << "\" viewBox=\"0 0 " << num(s.width) << ' '
            << num(s.height) << "\">\n";
        if (s.timestamp) {
            const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
            char buf[32];
            std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
            os_ << "<!-- generated " << buf << " -->\n";
        }
        os_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        if (!s.title.empty())
            os_ << "<text x=\"" << num(s.width / 2) << "\" y=\"20\" text-anchor=\"middle\" "
                << "font-family=\"sans-serif\" font-size=\"14\">" << escape(s.title) << "</text>\n";
    }

    double left() const { return kMarginLeft; }
    double right() const { return style_.width - kMarginRight; }
    double top() const { return kMarginTop; }
    double bottom() const { return style_.height - kMarginBottom; }

    double px(double v, const Range& r) const { return left() + (v - r.lo) / (r.hi - r.lo) * (right() - left()); }
    double py(double v, const Range& r) const { return bottom() - (v - r.lo) / (r.hi - r.lo) * (bottom() - top()); }

    void axes(const Range& xr, const Range& yr, bool x_ticks = true) {
        os_ << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
            << "<line x1=\"" << num(left()) << "\" y1=\"" << num(bottom()) << "\" x2=\"" << num(right())
            << "\" y2=\"" << num(bottom()) << "\"/>\n"
            << "<line x1=\"" << num(left()) << "\" y1=\"" << num(top()) << "\" x2=\"" << num(left())
            << "\" y2=\"" << num(bottom()) << "\"/>\n</g>\n";
        os_ << "<g font-family=\"sans-serif\" font-size=\"10\">\n";
        for (int i = 0; i <= 4; ++i) {
            const double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
            os_ << "<text x=\"" << num(left() - 4) << "\" y=\"" << num(py(yv, yr) + 3)
                << "\" text-anchor=\"end\">" << tick(yv) << "</text>\n";
            if (x_ticks) {
                const double xv = xr.lo + (xr.hi - xr.lo) * i / 4.0;
                os_ << "<text x=\"" << num(px(xv, xr)) << "\" y=\"" << num(bottom() + 14)
                    << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
            }
        }
        os_ << "</g>\n";
        if (!style_.x_label.empty())
            os_ << "<text x=\"" << num((left() + right()) / 2) << "\" y=\"" << num(style_.height - 8)
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
                << escape(style_.x_label) << "</text>\n";
        if (!style_.y_label.empty())
            os_ << "<text x=\"14\" y=\"" << num((top() + bottom()) / 2)
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 "
                << num((top() + bottom()) / 2) << ")\">" << escape(style_.y_label) << "</text>\n";
    }

    void legend(const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            const double y = top() + 4 + 14.0 * static_cast<double>(i);
            os_ << "<rect x=\"" << num(right() - 110) << "\" y=\"" << num(y) << "\" width=\"10\" height=\"10\" fill=\""
                << kPalette[i % kPalette.size()] << "\"/>\n"
                << "<text x=\"" << num(right() - 96) << "\" y=\"" << num(y + 9)
                << "\" font-family=\"sans-serif\" font-size=\"10\">" << escape(names[i]) << "</text>\n";
        }
    }

    std::ostringstream& out() { return os_; }

    std::string finish() {
        os_ << "</svg>\n";
        return os_.str();
    }

private:
    static std::string tick(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        return buf;
    }

    Style style_;
    std::ostringstream os_;
};

}  // namespace

std::string ramp_color(double t) {
    // Piecewise-linear approximation of viridis.
    static const std::array<std::array<double, 3>, 5> stops = {{{68, 1, 84},
                                                                {59, 82, 139},
                                                                {33, 145, 140},
                                                                {94, 201, 98},
                                                                {253, 231, 37}}};
    if (!std::isfinite(t)) t = 0.0;
    t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
    const double f = t - static_cast<double>(i);
    char buf[8];
    int rgb[3];
    for (int c = 0; c < 3; ++c)
        rgb[c] = static_cast<int>(std::lround(stops[i][c] + f * (stops[i + 1][c] - stops[i][c])));
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

std::string scatter(const std::vector<double>& x, const std::vector<double>& y,
                    const std::vector<double>& color, const Style& style) {
    Canvas c(style);
    Range xr, yr, cr;
    const std::size_t n = std::min(x.size(), y.size());
    for (std::size_t i = 0; i < n; ++i) {
        xr.add(x[i]);
        yr.add(y[i]);
        if (i < color.size()) cr.add(color[i]);
    }
    xr.finish();
    yr.finish();
    c.axes(xr, yr);
    const double clo = std::isfinite(cr.lo) ? cr.lo : 0.0;
    const double cspan = std::isfinite(cr.lo) && cr.hi > cr.lo ? cr.hi - cr.lo : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
        const double t = i < color.size() ? (color[i] - clo) / cspan : 0.0;
        c.out() << "<circle class=\"point\" cx=\"" << num(c.px(x[i], xr)) << "\" cy=\""
                << num(c.py(y[i], yr)) << "\" r=\"3\" fill=\"" << ramp_color(t) << "\"/>\n";
    }
    return c.finish();
}

std::string grouped_bars(const std::vector<BarGroup>& groups,
                         const std::vector<std::string>& series_names, const Style& style) {
    Canvas c(style);
    Range yr;
    yr.add(0.0);
    for (const auto& g : groups)
        for (double v : g.values) yr.add(v);
    yr.finish();
    Range xr{0.0, static_cast<double>(std::max<std::size_t>(groups.size(), 1))};
    c.axes(xr, yr, false);
    const double slot = (c.right() - c.left()) / std::max<std::size_t>(groups.size(), 1);
    const std::size_t k = std::max<std::size_t>(series_names.size(), 1);
    const double bar = 0.8 * slot / static_cast<double>(k);
    const double base = c.py(std::max(0.0, yr.lo), yr);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double x0 = c.left() + slot * static_cast<double>(g) + 0.1 * slot;
        for (std::size_t s = 0; s < groups[g].values.size(); ++s) {
            const double v = groups[g].values[s];
            if (!std::isfinite(v)) continue;
            const double yv = c.py(v, yr);
            c.out() << "<rect class=\"bar\" x=\"" << num(x0 + bar * static_cast<double>(s)) << "\" y=\""
                    << num(std::min(yv, base)) << "\" width=\"" << num(bar) << "\" height=\""
                    << num(std::abs(base - yv)) << "\" fill=\"" << kPalette[s % kPalette.size()] << "\"/>\n";
        }
        c.out() << "<text x=\"" << num(x0 + 0.4 * slot) << "\" y=\"" << num(c.bottom() + 14)
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
                << escape(groups[g].label) << "</text>\n";
    }
    c.legend(series_names);
    return c.finish();
}

std::string line_chart(const std::vector<Series>& series, const Style& style,
                       const double* fit_slope, const double* fit_intercept) {
    Canvas c(style);
    Range xr, yr;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            xr.add(s.x[i]);
            const double e = i < s.err.size() && std::isfinite(s.err[i]) ? s.err[i] : 0.0;
            yr.add(s.y[i] - e);
            yr.add(s.y[i] + e);
        }
    xr.finish();
    yr.finish();
    c.axes(xr, yr);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kPalette[k % kPalette.size()];
        names.push_back(s.name);
        c.out() << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            c.out() << (first ? "" : " ") << num(c.px(s.x[i], xr)) << ',' << num(c.py(s.y[i], yr));
            first = false;
        }
        c.out() << "\"/>\n";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            const double cx = c.px(s.x[i], xr);
            c.out() << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(c.py(s.y[i], yr))
                    << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
            if (i < s.err.size() && std::isfinite(s.err[i]) && s.err[i] > 0)
                c.out() << "<line class=\"errorbar\" x1=\"" << num(cx) << "\" y1=\""
                        << num(c.py(s.y[i] - s.err[i], yr)) << "\" x2=\"" << num(cx) << "\" y2=\""
                        << num(c.py(s.y[i] + s.err[i], yr)) << "\" stroke=\"" << color << "\"/>\n";
        }
    }
    if (fit_slope && fit_intercept && std::isfinite(*fit_slope) && std::isfinite(*fit_intercept)) {
        const double x0 = xr.lo, x1 = xr.hi;
        c.out() << "<line class=\"fit\" x1=\"" << num(c.px(x0, xr)) << "\" y1=\""
                << num(c.py(*fit_slope * x0 + *fit_intercept, yr)) << "\" x2=\"" << num(c.px(x1, xr))
                << "\" y2=\"" << num(c.py(*fit_slope * x1 + *fit_intercept, yr))
                << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    }
    if (names.size() > 1) c.legend(names);
    return c.finish();
}

std::string heatmap(const Matrix& m, const Style& style) {
    Canvas c(style);
    Range vr;
    for (double v : m.data()) vr.add(v);
    const double lo = std::isfinite(vr.lo) ? vr.lo : 0.0;
    const double span = std::isfinite(vr.lo) && vr.hi > vr.lo ? vr.hi - vr.lo : 1.0;
    const double w = (c.right() - c.left()) / std::max<std::size_t>(m.cols(), 1);
    const double h = (c.bottom() - c.top()) / std::max<std::size_t>(m.rows(), 1);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t k = 0; k < m.cols(); ++k)
            c.out() << "<rect class=\"cell\" x=\"" << num(c.left() + w * static_cast<double>(k)) << "\" y=\""
                    << num(c.top() + h * static_cast<double>(i)) << "\" width=\"" << num(w) << "\" height=\""
                    << num(h) << "\" fill=\"" << ramp_color((m(i, k) - lo) / span) << "\"/>\n";
    return c.finish();
}

}  // namespace pclab::svg
