#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aba/regression.hpp"

namespace aba::tools {

namespace detail {

inline std::string fmt(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Round step of roughly `target` intervals over [lo, hi].
inline double tick_step(double lo, double hi, int target = 5) {
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
        if (raw <= m * mag) return m * mag;
    return 10.0 * mag;
}

inline std::string_view colour(const std::optional<Species>& s) {
    if (!s) return "#777777";
    switch (*s) {
        case Species::Spruce: return "#1b7837";
        case Species::Pine: return "#b35806";
        case Species::Deciduous: return "#2166ac";
    }
    return "#777777";
}

}  // namespace detail

// Observed against predicted, coloured by dominant species, with a 1:1 line.
inline void write_scatter_svg(std::ostream& out, std::span<const regression::EvalPlot> plots, std::string_view title) {
    using detail::fmt;
    constexpr double W = 480, H = 480, L = 60, R = 20, T = 40, B = 50;
    double lo = 0.0, hi = 1.0;
    if (!plots.empty()) {
        lo = hi = plots.front().observed;
        for (const auto& p : plots) {
            lo = std::min({lo, p.observed, p.predicted});
            hi = std::max({hi, p.observed, p.predicted});
        }
    }
    if (hi <= lo) hi = lo + 1.0;
    const double step = detail::tick_step(lo, hi);
    lo = std::floor(lo / step) * step;
    hi = std::ceil(hi / step) * step;
    auto sx = [&](double v) { return L + (v - lo) / (hi - lo) * (W - L - R); };
    auto sy = [&](double v) { return H - B - (v - lo) / (hi - lo) * (H - T - B); };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
        << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    const int digits = step < 1.0 ? 2 : 0;
    for (double v = lo; v <= hi + step * 1e-9; v += step) {
        out << "<line x1=\"" << fmt(sx(v)) << "\" y1=\"" << H - B << "\" x2=\"" << fmt(sx(v)) << "\" y2=\"" << H - B + 5
            << "\" stroke=\"black\"/><text x=\"" << fmt(sx(v)) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
            << fmt(v, digits) << "</text>\n";
        out << "<line x1=\"" << L - 5 << "\" y1=\"" << fmt(sy(v)) << "\" x2=\"" << L << "\" y2=\"" << fmt(sy(v))
            << "\" stroke=\"black\"/><text x=\"" << L - 8 << "\" y=\"" << fmt(sy(v) + 4) << "\" text-anchor=\"end\">"
            << fmt(v, digits) << "</text>\n";
    }
    out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">predicted</text>\n";
    out << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << (T + H - B) / 2 << ")\">observed</text>\n";
    out << "<line x1=\"" << fmt(sx(lo)) << "\" y1=\"" << fmt(sy(lo)) << "\" x2=\"" << fmt(sx(hi)) << "\" y2=\""
        << fmt(sy(hi)) << "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
    for (const auto& p : plots)
        out << "<circle cx=\"" << fmt(sx(p.predicted)) << "\" cy=\"" << fmt(sy(p.observed)) << "\" r=\"2.5\" fill=\""
            << detail::colour(p.dominant) << "\" fill-opacity=\"0.7\"/>\n";
    double ly = T + 6;
    for (Species s : kAllSpecies) {
        out << "<circle cx=\"" << L + 12 << "\" cy=\"" << ly << "\" r=\"4\" fill=\"" << detail::colour(s)
            << "\"/><text x=\"" << L + 20 << "\" y=\"" << ly + 4 << "\">" << to_string(s) << "</text>\n";
        ly += 14;
    }
    out << "</svg>\n";
}

}  // namespace aba::tools
