#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "powersched/csv.hpp"
#include "powersched/errors.hpp"

namespace powersched {

// Deliberately small chart writer: axes, ticks, polylines, legend.  The
// CSV tables are the real output; these files are a quick visual check.
struct SvgSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

namespace detail {

inline std::string svg_color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#9467bd", "#ff7f0e", "#8c564b"};
    return palette[i % (sizeof palette / sizeof palette[0])];
}

}  // namespace detail

inline void write_svg_chart(const std::filesystem::path& path, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            std::vector<SvgSeries> series, bool log_x = false) {
    const double width = 720, height = 480;
    const double ml = 70, mr = 20, mt = 40, mb = 55;  // margins
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (auto& s : series)
        for (auto& [x, y] : s.points) {
            const double xv = log_x ? std::log10(x) : x;
            x_lo = std::min(x_lo, xv);
            x_hi = std::max(x_hi, xv);
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    if (!(x_hi >= x_lo) || !(y_hi >= y_lo))
        throw ConfigError("write_svg_chart: no finite data points");
    if (x_hi == x_lo) {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if (y_hi == y_lo) {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    const double y_pad = 0.05 * (y_hi - y_lo);
    y_lo -= y_pad;
    y_hi += y_pad;

    auto px = [&](double x) {
        const double xv = log_x ? std::log10(x) : x;
        return ml + (xv - x_lo) / (x_hi - x_lo) * (width - ml - mr);
    };
    auto py = [&](double y) {
        return height - mb - (y - y_lo) / (y_hi - y_lo) * (height - mt - mb);
    };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_number(width) +
           "\" height=\"" + format_number(height) + "\" font-family=\"sans-serif\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + format_number(width / 2) + "\" y=\"24\" text-anchor=\"middle\" "
           "font-size=\"16\">" + title + "</text>\n";

    // Axes with five ticks per side.
    out += "<line x1=\"" + format_number(ml) + "\" y1=\"" + format_number(height - mb) +
           "\" x2=\"" + format_number(width - mr) + "\" y2=\"" +
           format_number(height - mb) + "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + format_number(ml) + "\" y1=\"" + format_number(mt) + "\" x2=\"" +
           format_number(ml) + "\" y2=\"" + format_number(height - mb) +
           "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = x_lo + t * (x_hi - x_lo) / 4;
        const double gx = ml + t * (width - ml - mr) / 4;
        const double label_x = log_x ? std::pow(10.0, fx) : fx;
        out += "<line x1=\"" + format_number(gx) + "\" y1=\"" + format_number(height - mb) +
               "\" x2=\"" + format_number(gx) + "\" y2=\"" + format_number(height - mb + 5) +
               "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + format_number(gx) + "\" y=\"" + format_number(height - mb + 20) +
               "\" text-anchor=\"middle\" font-size=\"11\">" +
               format_number(std::round(label_x * 1e4) / 1e4) + "</text>\n";
        const double fy = y_lo + t * (y_hi - y_lo) / 4;
        const double gy = py(fy);
        out += "<line x1=\"" + format_number(ml - 5) + "\" y1=\"" + format_number(gy) +
               "\" x2=\"" + format_number(ml) + "\" y2=\"" + format_number(gy) +
               "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + format_number(ml - 8) + "\" y=\"" + format_number(gy + 4) +
               "\" text-anchor=\"end\" font-size=\"11\">" +
               format_number(std::round(fy * 1e4) / 1e4) + "</text>\n";
    }
    out += "<text x=\"" + format_number((ml + width - mr) / 2) + "\" y=\"" +
           format_number(height - 12) + "\" text-anchor=\"middle\" font-size=\"13\">" +
           x_label + "</text>\n";
    out += "<text x=\"16\" y=\"" + format_number((mt + height - mb) / 2) +
           "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " +
           format_number((mt + height - mb) / 2) + ")\">" + y_label + "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        auto pts = series[i].points;
        std::sort(pts.begin(), pts.end());
        std::string poly;
        for (auto& [x, y] : pts)
            poly += format_number(px(x)) + "," + format_number(py(y)) + " ";
        out += "<polyline fill=\"none\" stroke=\"" + detail::svg_color(i) +
               "\" stroke-width=\"1.5\" points=\"" + poly + "\"/>\n";
        const double ly = mt + 16.0 * (i + 1);
        out += "<line x1=\"" + format_number(width - mr - 150) + "\" y1=\"" +
               format_number(ly - 4) + "\" x2=\"" + format_number(width - mr - 125) +
               "\" y2=\"" + format_number(ly - 4) + "\" stroke=\"" + detail::svg_color(i) +
               "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + format_number(width - mr - 120) + "\" y=\"" +
               format_number(ly) + "\" font-size=\"11\">" + series[i].name + "</text>\n";
    }
    out += "</svg>\n";
    write_text_atomic(path, out);
}

}  // namespace powersched
