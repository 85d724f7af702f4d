// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rda/error.hpp"
#include "rda/harness.hpp"

namespace rda {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
constexpr int kConfidenceBins = 20;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

class Svg {
 public:
  explicit Svg(const std::string& title) {
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    text(kWidth / 2, 22, title, "middle", 15);
    line(kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom, "black");
    line(kLeft, kTop, kLeft, kHeight - kBottom, "black");
  }

  void line(double x1, double y1, double x2, double y2, const char* color) {
    os_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
        << "\" y2=\"" << num(y2) << "\" stroke=\"" << color << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const char* color, double opacity = 1.0) {
    os_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
        << "\" height=\"" << num(std::max(h, 0.0)) << "\" fill=\"" << color
        << "\" fill-opacity=\"" << num(opacity) << "\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const char* color) {
    os_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) os_ << num(x) << ',' << num(y) << ' ';
    os_ << "\"/>\n";
    for (const auto& [x, y] : pts)
      os_ << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"2.5\" fill=\"" << color
          << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, const char* anchor = "middle",
            int size = 11) {
    os_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\""
        << size << "\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
  }
  void legend(double x, double y, const char* color, const std::string& label) {
    rect(x, y - 9, 12, 10, color);
    text(x + 16, y, label, "start");
  }
  // Y axis ticks for [0, top].
  void y_axis(double top, const std::string& label) {
    for (int k = 0; k <= 4; ++k) {
      const double v = top * k / 4.0;
      const double y = plot_y(v, top);
      line(kLeft - 4, y, kLeft, y, "black");
      text(kLeft - 6, y + 4, num(v), "end", 10);
    }
    os_ << "<text x=\"14\" y=\"" << num(kHeight / 2) << "\" font-family=\"sans-serif\" font-size=\"11\" "
        << "text-anchor=\"middle\" transform=\"rotate(-90 14 " << num(kHeight / 2) << ")\">" << label
        << "</text>\n";
  }

  static double plot_y(double v, double top) {
    return kHeight - kBottom - (top > 0 ? v / top : 0.0) * (kHeight - kTop - kBottom);
  }
  static double plot_w() { return kWidth - kLeft - kRight; }

  std::string finish() {
    os_ << "</svg>\n";
    return os_.str();
  }

 private:
  std::ostringstream os_;
};

fs::path save(const fs::path& path, const std::string& svg) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCategory::Io, "cannot open " + path.string() + " for writing");
  os << svg;
  if (!os) fail(ErrorCategory::Io, "write failed for " + path.string());
  return path;
}

std::string accuracy_plot(const RunMetrics& m) {
  Svg svg("Test accuracy (" + method_name(m.method) + ", seed " + std::to_string(m.seed) + ")");
  svg.y_axis(1.0, "accuracy");
  const std::size_t last = m.epochs.back().epoch;
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : m.epochs) {
    const double frac = last == 0 ? 0.5 : static_cast<double>(r.epoch) / static_cast<double>(last);
    pts.emplace_back(kLeft + frac * Svg::plot_w(), Svg::plot_y(r.accuracy, 1.0));
  }
  svg.polyline(pts, "steelblue");
  svg.text(kLeft, kHeight - kBottom + 16, "0");
  svg.text(kWidth - kRight, kHeight - kBottom + 16, std::to_string(last));
  svg.text(kWidth / 2, kHeight - 12, "epoch");
  return svg.finish();
}

std::string marginal_plot(const RunMetrics& m) {
  const ProbVec& pseudo = m.epochs.back().pseudo_marginal;
  const ProbVec& truth = m.true_unlabeled_marginal;
  const std::size_t n = pseudo.size();
  double top = 0.0;
  for (std::size_t c = 0; c < n; ++c) top = std::max({top, pseudo[c], truth.size() == n ? truth[c] : 0.0});
  top = std::max(top * 1.1, 0.05);
  Svg svg("Pseudo-label marginal vs unlabeled ground truth");
  svg.y_axis(top, "ratio of labels");
  const double group = Svg::plot_w() / static_cast<double>(n);
  const double bar = group * 0.38;
  for (std::size_t c = 0; c < n; ++c) {
    const double x = kLeft + group * static_cast<double>(c) + group * 0.1;
    svg.rect(x, Svg::plot_y(pseudo[c], top), bar, Svg::plot_y(0, top) - Svg::plot_y(pseudo[c], top),
             "steelblue");
    if (truth.size() == n)
      svg.rect(x + bar, Svg::plot_y(truth[c], top), bar,
               Svg::plot_y(0, top) - Svg::plot_y(truth[c], top), "darkorange");
    svg.text(x + bar, kHeight - kBottom + 16, std::to_string(c));
  }
  svg.legend(kWidth - 200, kTop + 4, "steelblue", method_name(m.method));
  svg.legend(kWidth - 200, kTop + 20, "darkorange", "unlabeled data");
  svg.text(kWidth / 2, kHeight - 12, "class");
  return svg.finish();
}

std::string confidence_plot(const RunMetrics& m) {
  std::vector<double> correct(kConfidenceBins, 0.0), wrong(kConfidenceBins, 0.0);
  double n_correct = 0.0, n_wrong = 0.0;
  for (const auto& [conf, ok] : m.confidences) {
    const int bin = std::clamp(static_cast<int>(conf * kConfidenceBins), 0, kConfidenceBins - 1);
    (ok ? correct : wrong)[static_cast<std::size_t>(bin)] += 1.0;
    (ok ? n_correct : n_wrong) += 1.0;
  }
  // Densities, so each series integrates to one over [0, 1].
  const double width = 1.0 / kConfidenceBins;
  for (auto& v : correct) v = n_correct > 0 ? v / (n_correct * width) : 0.0;
  for (auto& v : wrong) v = n_wrong > 0 ? v / (n_wrong * width) : 0.0;
  double top = 1.0;
  for (int b = 0; b < kConfidenceBins; ++b)
    top = std::max({top, correct[static_cast<std::size_t>(b)], wrong[static_cast<std::size_t>(b)]});
  top *= 1.1;
  const std::string tag = method_name(m.method);
  Svg svg("Confidence of predictions (" + tag + ")");
  svg.y_axis(top, "density");
  const double bw = Svg::plot_w() / kConfidenceBins;
  for (int b = 0; b < kConfidenceBins; ++b) {
    const double x = kLeft + bw * b;
    const auto i = static_cast<std::size_t>(b);
    svg.rect(x, Svg::plot_y(correct[i], top), bw, Svg::plot_y(0, top) - Svg::plot_y(correct[i], top),
             "seagreen", 0.55);
    svg.rect(x, Svg::plot_y(wrong[i], top), bw, Svg::plot_y(0, top) - Svg::plot_y(wrong[i], top),
             "crimson", 0.55);
  }
  for (int k = 0; k <= 4; ++k)
    svg.text(kLeft + Svg::plot_w() * k / 4.0, kHeight - kBottom + 16, num(k / 4.0));
  svg.legend(kLeft + 12, kTop + 4, "seagreen", "C-" + tag);
  svg.legend(kLeft + 12, kTop + 20, "crimson", "F-" + tag);
  svg.text(kWidth / 2, kHeight - 12, "confidence");
  return svg.finish();
}

}  // namespace

std::vector<fs::path> emit_plots(const RunMetrics& metrics, const fs::path& output_dir) {
  require(!metrics.epochs.empty(), ErrorCategory::Usage, "emit_plots: no epochs recorded");
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec || !fs::is_directory(output_dir))
    fail(ErrorCategory::Io, "cannot create directory " + output_dir.string());
  return {save(output_dir / "accuracy.svg", accuracy_plot(metrics)),
          save(output_dir / "marginal.svg", marginal_plot(metrics)),
          save(output_dir / "confidence.svg", confidence_plot(metrics))};
}

}  // namespace rda
