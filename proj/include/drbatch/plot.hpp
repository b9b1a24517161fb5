#pragma once

// Minimal deterministic SVG line chart for speedup tables: log-scaled x (batch size),
// linear y, one polyline per (strategy, n_dofs).

#include "drbatch/bench.hpp"
#include "drbatch/detail/text.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace drb {

enum class PlotMetric { SelfSpeedup, SpeedupOverNaive };

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points; ///< (n_problems, value), ascending n
};

inline std::vector<PlotSeries> plot_series(const std::vector<SpeedupRow>& rows, PlotMetric metric) {
    std::map<std::pair<std::string, std::size_t>, std::vector<std::pair<double, double>>> grouped;
    for (const auto& r : rows) {
        const auto& v = metric == PlotMetric::SelfSpeedup ? r.self_speedup : r.speedup_over_naive;
        if (v)
            grouped[{r.strategy, r.n_dofs}].emplace_back(double(r.n_problems), *v);
    }
    std::vector<PlotSeries> out;
    for (auto& [key, pts] : grouped) {
        std::sort(pts.begin(), pts.end());
        out.push_back({key.first + " (" + std::to_string(key.second) + " dofs)", std::move(pts)});
    }
    return out;
}

inline std::string render_svg(const std::vector<SpeedupRow>& rows, PlotMetric metric) {
    using detail::format_fixed;
    constexpr double width = 720, height = 480, left = 70, right = 200, top = 30, bottom = 60;
    constexpr double plot_w = width - left - right, plot_h = height - top - bottom;
    static constexpr std::array<const char*, 8> palette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                        "#9467bd", "#8c564b", "#e377c2", "#17becf"};

    const auto series = plot_series(rows, metric);
    std::set<double> xs;
    double y_max = 0.0;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            xs.insert(x);
            y_max = std::max(y_max, y);
        }
    double lx0 = 0.0, lx1 = 1.0;
    if (!xs.empty()) {
        lx0 = std::log10(*xs.begin());
        lx1 = std::log10(*xs.rbegin());
        if (lx1 <= lx0) {
            lx0 -= 0.5;
            lx1 += 0.5;
        }
    }
    y_max = y_max > 0.0 ? 1.1 * y_max : 1.0;

    auto px = [&](double x) { return left + (std::log10(x) - lx0) / (lx1 - lx0) * plot_w; };
    auto py = [&](double y) { return top + plot_h - y / y_max * plot_h; };
    auto f2 = [](double v) { return format_fixed(v, 2); };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f2(width) + "\" height=\"" + f2(height) +
           "\" viewBox=\"0 0 " + f2(width) + " " + f2(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<g id=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
    svg += "<line x1=\"" + f2(left) + "\" y1=\"" + f2(top + plot_h) + "\" x2=\"" + f2(left + plot_w) + "\" y2=\"" +
           f2(top + plot_h) + "\"/>\n";
    svg += "<line x1=\"" + f2(left) + "\" y1=\"" + f2(top) + "\" x2=\"" + f2(left) + "\" y2=\"" + f2(top + plot_h) +
           "\"/>\n";
    svg += "</g>\n";

    svg += "<g id=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (double x : xs) {
        svg += "<text x=\"" + f2(px(x)) + "\" y=\"" + f2(top + plot_h + 16) + "\" text-anchor=\"middle\">" +
               std::to_string(static_cast<long long>(x)) + "</text>\n";
    }
    for (int k = 0; k <= 5; ++k) {
        const double y = y_max * k / 5.0;
        svg += "<text x=\"" + f2(left - 6) + "\" y=\"" + f2(py(y) + 4) + "\" text-anchor=\"end\">" + f2(y) +
               "</text>\n";
    }
    svg += "<text x=\"" + f2(left + plot_w / 2) + "\" y=\"" + f2(height - 16) +
           "\" text-anchor=\"middle\">concurrent sub-problems (log scale)</text>\n";
    svg += "<text x=\"16\" y=\"" + f2(top + plot_h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
           f2(top + plot_h / 2) + ")\">" +
           (metric == PlotMetric::SelfSpeedup ? "self speedup" : "speedup over naive") + "</text>\n";
    svg += "</g>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const std::string colour = palette[i % palette.size()];
        std::string pts;
        for (const auto& [x, y] : s.points) {
            if (!pts.empty())
                pts += ' ';
            pts += f2(px(x)) + "," + f2(py(y));
        }
        svg += "<polyline class=\"series\" fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"2\" points=\"" + pts +
               "\"/>\n";
        for (const auto& [x, y] : s.points)
            svg += "<circle cx=\"" + f2(px(x)) + "\" cy=\"" + f2(py(y)) + "\" r=\"3\" fill=\"" + colour + "\"/>\n";
        const double ly = top + 14.0 * double(i);
        svg += "<text x=\"" + f2(left + plot_w + 12) + "\" y=\"" + f2(ly + 10) +
               "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + colour + "\">" + s.label + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace drb
