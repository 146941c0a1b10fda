// mftl: minimal SVG plotting for rate reports.
// SPDX-License-Identifier: MIT
#include "mftl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mftl {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 50.0;

struct LogRange {
    double lo = 0.0;
    double hi = 1.0;

    void include(double v) {
        if (!(v > 0.0)) return;
        const double l = std::log10(v);
        lo = std::min(lo, l);
        hi = std::max(hi, l);
    }
};

std::string fmt(double v, int digits = 3) {
    std::ostringstream out;
    out << std::setprecision(digits) << v;
    return out.str();
}

}  // namespace

std::string rate_svg(const RateReport& report, const std::string& title) {
    LogRange xr{std::numeric_limits<double>::infinity(),
                -std::numeric_limits<double>::infinity()};
    LogRange yr = xr;
    for (const RatePoint& pt : report.points) {
        xr.include(pt.n);
        if (pt.mean > 0.0) yr.include(pt.mean);
    }
    if (!(xr.lo < xr.hi)) {
        xr.lo -= 0.5;
        xr.hi += 0.5;
    }
    if (!(yr.lo < yr.hi)) {
        yr.lo -= 0.5;
        yr.hi += 0.5;
    }
    const double xpad = 0.05 * (xr.hi - xr.lo);
    const double ypad = 0.10 * (yr.hi - yr.lo);
    xr.lo -= xpad;
    xr.hi += xpad;
    yr.lo -= ypad;
    yr.hi += ypad;

    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    const auto sx = [&](double n) {
        return kMarginLeft + (std::log10(n) - xr.lo) / (xr.hi - xr.lo) * plot_w;
    };
    const auto sy = [&](double v) {
        return kMarginTop + (yr.hi - std::log10(v)) / (yr.hi - yr.lo) * plot_h;
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
        << kHeight << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << title
        << " (slope " << fmt(report.slope) << ", R^2 " << fmt(report.r2)
        << ")</text>\n";

    // Frame and integer-decade ticks.
    svg << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\""
        << plot_w << "\" height=\"" << plot_h
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int e = static_cast<int>(std::ceil(xr.lo)); e <= static_cast<int>(std::floor(xr.hi));
         ++e) {
        const double px = kMarginLeft + (e - xr.lo) / (xr.hi - xr.lo) * plot_w;
        svg << "<line x1=\"" << px << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
            << px << "\" y2=\"" << kMarginTop + plot_h + 6
            << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << px << "\" y=\"" << kMarginTop + plot_h + 22
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
            << "font-size=\"12\">1e" << e << "</text>\n";
    }
    for (int e = static_cast<int>(std::ceil(yr.lo)); e <= static_cast<int>(std::floor(yr.hi));
         ++e) {
        const double py = kMarginTop + (yr.hi - e) / (yr.hi - yr.lo) * plot_h;
        svg << "<line x1=\"" << kMarginLeft - 6 << "\" y1=\"" << py << "\" x2=\""
            << kMarginLeft << "\" y2=\"" << py << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << kMarginLeft - 10 << "\" y=\"" << py + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
            << "font-size=\"12\">1e" << e << "</text>\n";
    }
    svg << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"13\">n</text>\n";

    // Fitted power law: a straight segment in log-log space.
    if (!report.used.empty()) {
        const double n0 = std::pow(10.0, xr.lo);
        const double n1 = std::pow(10.0, xr.hi);
        const double y0 = std::exp(report.intercept + report.slope * std::log(n0));
        const double y1 = std::exp(report.intercept + report.slope * std::log(n1));
        svg << "<line x1=\"" << sx(n0) << "\" y1=\"" << sy(y0) << "\" x2=\""
            << sx(n1) << "\" y2=\"" << sy(y1)
            << "\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n";
    }

    // Points: filled circles entered the fit, hollow ones were dropped; error
    // bars span mean +- 2 SE when that interval stays positive.
    const auto draw_points = [&](const std::vector<RatePoint>& pts, bool filled) {
        for (const RatePoint& pt : pts) {
            if (!(pt.n > 0.0) || !(pt.mean > 0.0)) continue;
            const double lo = pt.mean - 2.0 * pt.se;
            if (lo > 0.0)
                svg << "<line x1=\"" << sx(pt.n) << "\" y1=\"" << sy(lo) << "\" x2=\""
                    << sx(pt.n) << "\" y2=\"" << sy(pt.mean + 2.0 * pt.se)
                    << "\" stroke=\"#d62728\"/>\n";
            svg << "<circle cx=\"" << sx(pt.n) << "\" cy=\"" << sy(pt.mean)
                << "\" r=\"4\" stroke=\"#d62728\" fill=\""
                << (filled ? "#d62728" : "white") << "\"/>\n";
        }
    };
    draw_points(report.used, true);
    draw_points(report.dropped, false);

    svg << "</svg>\n";
    return svg.str();
}

void save_rate_svg(const std::string& path, const RateReport& report,
                   const std::string& title) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("save_rate_svg: cannot open " + path);
    out << rate_svg(report, title);
}

}  // namespace mftl
