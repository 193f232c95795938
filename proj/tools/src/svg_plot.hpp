#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace evolyap::tools {

// Minimal standalone SVG line/scatter chart, no external rendering runtime.
class SvgChart {
 public:
  SvgChart(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void add_line(const std::string& name, const std::vector<double>& x,
                const std::vector<double>& y) {
    series_.push_back({name, x, y, false});
  }
  void add_scatter(const std::string& name, const std::vector<double>& x,
                   const std::vector<double>& y) {
    series_.push_back({name, x, y, true});
  }
  void set_log_y(bool on) { log_y_ = on; }

  void write(const std::string& path) const {
    const double W = 760, H = 480, L = 70, R = 160, T = 40, B = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series_)
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        const double yv = transform(s.y[i]);
        if (!std::isfinite(s.x[i]) || !std::isfinite(yv)) continue;
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        ymin = std::min(ymin, yv);
        ymax = std::max(ymax, yv);
      }
    if (xmin > xmax) {
      xmin = 0;
      xmax = 1;
    }
    if (ymin > ymax) {
      ymin = 0;
      ymax = 1;
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
    if (ymax - ymin < 1e-12) ymax = ymin + 1.0;

    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double y) { return H - B - (transform(y) - ymin) / (ymax - ymin) * (H - T - B); };

    std::ofstream out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << title_ << "</text>\n";

    // Axes and ticks.
    out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n";
    char buf[64];
    for (int i = 0; i <= 5; ++i) {
      const double xv = xmin + (xmax - xmin) * i / 5.0;
      const double yv = ymin + (ymax - ymin) * i / 5.0;
      std::snprintf(buf, sizeof(buf), "%.3g", xv);
      out << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18
          << "\" text-anchor=\"middle\" font-size=\"11\">" << buf << "</text>\n";
      std::snprintf(buf, sizeof(buf), "%.3g", log_y_ ? std::pow(10.0, yv) : yv);
      out << "<text x=\"" << L - 6 << "\" y=\"" << H - B - (H - T - B) * i / 5.0 + 4
          << "\" text-anchor=\"end\" font-size=\"11\">" << buf << "</text>\n";
    }
    out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel_ << "</text>\n";
    out << "<text x=\"16\" y=\"" << (T + H - B) / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
        << (T + H - B) / 2 << ")\">" << (log_y_ ? ylabel_ + " (log)" : ylabel_) << "</text>\n";

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    for (std::size_t si = 0; si < series_.size(); ++si) {
      const auto& s = series_[si];
      const char* color = palette[si % 8];
      if (s.scatter) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
          if (!std::isfinite(s.x[i]) || !std::isfinite(transform(s.y[i]))) continue;
          out << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i])
              << "\" r=\"2.5\" fill=\"" << color << "\" fill-opacity=\"0.7\"/>\n";
        }
      } else {
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.3\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
          if (!std::isfinite(s.x[i]) || !std::isfinite(transform(s.y[i]))) continue;
          out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        }
        out << "\"/>\n";
      }
      // Legend entry (first 12 series).
      if (si < 12) {
        const double ly = T + 16.0 * static_cast<double>(si);
        out << "<rect x=\"" << W - R + 10 << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\""
            << color << "\"/>\n";
        out << "<text x=\"" << W - R + 24 << "\" y=\"" << ly + 9 << "\" font-size=\"11\">" << s.name
            << "</text>\n";
      }
    }
    out << "</svg>\n";
  }

 private:
  struct Series {
    std::string name;
    std::vector<double> x, y;
    bool scatter = false;
  };

  double transform(double y) const {
    if (!log_y_) return y;
    return y > 0.0 ? std::log10(y) : std::nan("");
  }

  std::string title_, xlabel_, ylabel_;
  std::vector<Series> series_;
  bool log_y_ = false;
};

}  // namespace evolyap::tools
