#pragma once

// Minimal static SVG line chart for sweep outputs. Each series is normalized
// to its own range so differently scaled quantities share one canvas.

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

class SvgChart {
 public:
  explicit SvgChart(std::string title) : title_(std::move(title)) {}

  void add_series(std::string name, std::vector<double> xs,
                  std::vector<double> ys) {
    series_.push_back({std::move(name), std::move(xs), std::move(ys)});
  }

  void set_labels(std::vector<std::string> labels) {
    labels_ = std::move(labels);
  }

  std::string render() const {
    const int w = 640, h = 400, margin = 50;
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
       << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"16\">" << title_
       << "</text>\n";
    os << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\""
       << w - 2 * margin << "\" height=\"" << h - 2 * margin
       << "\" fill=\"none\" stroke=\"#888\"/>\n";

    for (std::size_t s = 0; s < series_.size(); ++s) {
      const auto& sr = series_[s];
      if (sr.xs.empty()) continue;
      double xmin = *std::min_element(sr.xs.begin(), sr.xs.end());
      double xmax = *std::max_element(sr.xs.begin(), sr.xs.end());
      double ymin = *std::min_element(sr.ys.begin(), sr.ys.end());
      double ymax = *std::max_element(sr.ys.begin(), sr.ys.end());
      if (xmax == xmin) xmax = xmin + 1;
      if (ymax == ymin) ymax = ymin + 1;
      os << "<polyline fill=\"none\" stroke=\"" << colors[s % 4]
         << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < sr.xs.size(); ++i) {
        double px = margin + (sr.xs[i] - xmin) / (xmax - xmin) *
                                 (w - 2 * margin);
        double py = h - margin - (sr.ys[i] - ymin) / (ymax - ymin) *
                                     (h - 2 * margin);
        os << px << ',' << py << ' ';
      }
      os << "\"/>\n";
      os << "<text x=\"" << margin + 8 << "\" y=\"" << margin + 18 + 18 * s
         << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
         << colors[s % 4] << "\">" << sr.name << "</text>\n";
    }

    if (!labels_.empty()) {
      for (std::size_t i = 0; i < labels_.size(); ++i) {
        double px = margin + (labels_.size() == 1
                                  ? 0.0
                                  : double(i) / double(labels_.size() - 1) *
                                        (w - 2 * margin));
        os << "<text x=\"" << px << "\" y=\"" << h - margin + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           << "font-size=\"11\">" << labels_[i] << "</text>\n";
      }
    }
    os << "</svg>\n";
    return os.str();
  }

 private:
  struct Series {
    std::string name;
    std::vector<double> xs, ys;
  };
  std::string title_;
  std::vector<Series> series_;
  std::vector<std::string> labels_;
};
