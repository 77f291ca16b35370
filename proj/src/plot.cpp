#include "mgm/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace mgm {
namespace {

constexpr double kWidth = 640, kHeight = 480, kMargin = 60;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header() {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace

std::string scatter_svg(const std::vector<std::string>& labels, const Eigen::MatrixXd& points) {
  std::ostringstream svg;
  svg << header();
  const Eigen::Index n = points.rows();
  const bool two_d = points.cols() >= 2;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (n > 0) {
    xmin = points.col(0).minCoeff();
    xmax = points.col(0).maxCoeff();
    ymin = two_d ? points.col(1).minCoeff() : 0;
    ymax = two_d ? points.col(1).maxCoeff() : 0;
  }
  if (xmax - xmin < 1e-12) { xmin -= 1; xmax += 1; }
  if (ymax - ymin < 1e-12) { ymin -= 1; ymax += 1; }
  const auto sx = [&](double x) { return kMargin + (x - xmin) / (xmax - xmin) * (kWidth - 2 * kMargin); };
  const auto sy = [&](double y) { return kHeight - kMargin - (y - ymin) / (ymax - ymin) * (kHeight - 2 * kMargin); };
  svg << "<line x1=\"" << num(kMargin) << "\" y1=\"" << num(kHeight - kMargin) << "\" x2=\"" << num(kWidth - kMargin)
      << "\" y2=\"" << num(kHeight - kMargin) << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << num(kMargin) << "\" y1=\"" << num(kMargin) << "\" x2=\"" << num(kMargin) << "\" y2=\""
      << num(kHeight - kMargin) << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << num(kWidth / 2) << "\" y=\"" << num(kHeight - 20) << "\">PC1</text>\n";
  svg << "<text x=\"15\" y=\"" << num(kHeight / 2) << "\">PC2</text>\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = sx(points(i, 0)), y = sy(two_d ? points(i, 1) : 0);
    svg << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"4\" fill=\"steelblue\"/>\n";
    svg << "<text x=\"" << num(x + 6) << "\" y=\"" << num(y - 6) << "\">"
        << escape(static_cast<std::size_t>(i) < labels.size() ? labels[static_cast<std::size_t>(i)] : "") << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string dendrogram_svg(const std::vector<std::string>& labels, const Dendrogram& d) {
  std::ostringstream svg;
  svg << header();
  const std::size_t n = d.leaves;
  if (n == 0) {
    svg << "</svg>\n";
    return svg.str();
  }
  const auto order = d.leaf_order();
  std::vector<double> x(n + d.merges.size()), h(n + d.merges.size(), 0.0);
  const double step = n > 1 ? (kWidth - 2 * kMargin) / static_cast<double>(n - 1) : 0;
  for (std::size_t k = 0; k < order.size(); ++k) x[order[k]] = kMargin + step * static_cast<double>(k);
  double top = 0;
  for (const auto& m : d.merges) top = std::max(top, m.height);
  if (top <= 0) top = 1;
  const auto sy = [&](double v) { return kHeight - kMargin - v / top * (kHeight - 2 * kMargin); };
  for (std::size_t s = 0; s < d.merges.size(); ++s) {
    const auto& m = d.merges[s];
    const std::size_t id = n + s;
    x[id] = (x[m.a] + x[m.b]) / 2;
    h[id] = m.height;
    svg << "<polyline fill=\"none\" stroke=\"black\" points=\"" << num(x[m.a]) << "," << num(sy(h[m.a])) << " "
        << num(x[m.a]) << "," << num(sy(m.height)) << " " << num(x[m.b]) << "," << num(sy(m.height)) << " "
        << num(x[m.b]) << "," << num(sy(h[m.b])) << "\"/>\n";
  }
  for (std::size_t leaf = 0; leaf < n; ++leaf) {
    svg << "<text x=\"" << num(x[leaf]) << "\" y=\"" << num(kHeight - kMargin + 14)
        << "\" text-anchor=\"middle\">" << escape(leaf < labels.size() ? labels[leaf] : "") << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace mgm
