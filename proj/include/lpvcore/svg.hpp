#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpvcore {

// Minimal self-contained SVG emission for the benchmark figures; the
// underlying numbers always ship alongside as CSV.

struct SvgSeries {
    std::string name;
    std::vector<double> y;
};

namespace detail {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

inline void svg_header(std::ostream& os, int w, int h, const std::string& title) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
       << title << "</text>\n";
}

} // namespace detail

inline void svg_line_chart(const std::string& path, const std::string& title,
                           const std::vector<double>& x, const std::vector<SvgSeries>& series) {
    const int w = 800, h = 420, ml = 60, mr = 20, mt = 40, mb = 40;
    double xmin = x.front(), xmax = x.back();
    double ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (double v : s.y) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    if (ymax <= ymin) ymax = ymin + 1.0;
    auto px = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double v) { return h - mb - (v - ymin) / (ymax - ymin) * (h - mt - mb); };

    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    detail::svg_header(f, w, h, title);
    f << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
      << h - mb << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
      << "\" stroke=\"black\"/>\n";
    for (std::size_t si = 0; si < series.size(); ++si) {
        f << "<polyline fill=\"none\" stroke=\"" << detail::kPalette[si % 5]
          << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < x.size(); ++i)
            f << px(x[i]) << "," << py(series[si].y[i]) << " ";
        f << "\"/>\n";
        f << "<text x=\"" << w - mr - 150 << "\" y=\"" << mt + 16 * (si + 1)
          << "\" font-size=\"12\" fill=\"" << detail::kPalette[si % 5] << "\">" << series[si].name
          << "</text>\n";
    }
    f << "</svg>\n";
}

inline void svg_bar_chart(const std::string& path, const std::string& title,
                          const std::vector<std::string>& groups,
                          const std::vector<SvgSeries>& series, double ymax = 100.0) {
    const int w = 800, h = 420, ml = 60, mr = 20, mt = 40, mb = 50;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    detail::svg_header(f, w, h, title);
    const double group_w = static_cast<double>(w - ml - mr) / static_cast<double>(groups.size());
    const double bar_w = group_w / (static_cast<double>(series.size()) + 1.0);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        for (std::size_t si = 0; si < series.size(); ++si) {
            double v = std::max(0.0, series[si].y[gi]);
            double bh = v / ymax * (h - mt - mb);
            double bx = ml + group_w * static_cast<double>(gi) + bar_w * (static_cast<double>(si) + 0.5);
            f << "<rect x=\"" << bx << "\" y=\"" << h - mb - bh << "\" width=\"" << bar_w * 0.9
              << "\" height=\"" << bh << "\" fill=\"" << detail::kPalette[si % 5] << "\"/>\n";
        }
        f << "<text x=\"" << ml + group_w * (static_cast<double>(gi) + 0.5) << "\" y=\"" << h - mb + 18
          << "\" text-anchor=\"middle\" font-size=\"12\">" << groups[gi] << "</text>\n";
    }
    for (std::size_t si = 0; si < series.size(); ++si)
        f << "<text x=\"" << w - mr - 120 << "\" y=\"" << mt + 16 * (si + 1)
          << "\" font-size=\"12\" fill=\"" << detail::kPalette[si % 5] << "\">" << series[si].name
          << "</text>\n";
    f << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb
      << "\" stroke=\"black\"/>\n</svg>\n";
}

} // namespace lpvcore
