#pragma once

#include <algorithm>
#include <cmath>

#include "rein/exp/fsutil.hpp"
#include "rein/model/edges.hpp"

namespace rein::expkit {

namespace detail {

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

inline std::string fmt_short(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

inline const char* series_color(int64_t object) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#e377c2"};
  return palette[object % 8];
}

}  // namespace detail

// Long-format dump of a rollout against ground truth. `truth` spans the
// context plus the horizon; `pred` starts at frame `context`.
template <class T>
std::string trajectory_csv(const Tensor<T>& truth, const Tensor<T>& pred, int32_t n_objects,
                           int64_t context) {
  check<InvalidArgument>(truth.cols == 4 * n_objects && pred.cols == 4 * n_objects,
                         "trajectory_csv: expected 4*n_objects columns");
  check<InvalidArgument>(truth.rows >= context + pred.rows, "trajectory_csv: truth has ",
                         truth.rows, " frames, need context ", context, " + horizon ", pred.rows);
  std::ostringstream os;
  os << "series,frame,object,x,y,vx,vy\n";
  os.precision(17);
  for (int64_t t = 0; t < truth.rows; ++t)
    for (int32_t i = 0; i < n_objects; ++i)
      os << "truth," << t << "," << i << "," << truth.at(t, 4 * i) << "," << truth.at(t, 4 * i + 1)
         << "," << truth.at(t, 4 * i + 2) << "," << truth.at(t, 4 * i + 3) << "\n";
  for (int64_t h = 0; h < pred.rows; ++h)
    for (int32_t i = 0; i < n_objects; ++i)
      os << "pred," << (context + h) << "," << i << "," << pred.at(h, 4 * i) << ","
         << pred.at(h, 4 * i + 1) << "," << pred.at(h, 4 * i + 2) << "," << pred.at(h, 4 * i + 3)
         << "\n";
  return os.str();
}

// Position-space overlay: ground truth solid, prediction dashed, one color
// per object; context portion drawn thinner. Self-contained SVG.
template <class T>
std::string trajectory_svg(const Tensor<T>& truth, const Tensor<T>& pred, int32_t n_objects,
                           int64_t context, int64_t size = 640) {
  check<InvalidArgument>(truth.cols == 4 * n_objects && pred.cols == 4 * n_objects,
                         "trajectory_svg: expected 4*n_objects columns");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  auto scan = [&](const Tensor<T>& m) {
    for (int64_t t = 0; t < m.rows; ++t)
      for (int32_t i = 0; i < n_objects; ++i)
        for (int64_t c = 0; c < 2; ++c) {
          const double x = static_cast<double>(m.at(t, 4 * i + c));
          lo = std::min(lo, x);
          hi = std::max(hi, x);
        }
  };
  scan(truth);
  scan(pred);
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double s = static_cast<double>(size) / (hi - lo);
  auto px = [&](double x) { return (x - lo) * s; };
  auto py = [&](double y) { return static_cast<double>(size) - (y - lo) * s; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
     << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
  os << "<rect width=\"" << size << "\" height=\"" << size << "\" fill=\"white\"/>\n";
  auto polyline = [&](const Tensor<T>& m, int32_t i, int64_t t0, int64_t t1, const char* color,
                      const char* dash, double width) {
    if (t1 - t0 < 2) return;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\"";
    if (dash[0] != '\0') os << " stroke-dasharray=\"" << dash << "\"";
    os << " points=\"";
    for (int64_t t = t0; t < t1; ++t)
      os << detail::fmt_short(px(static_cast<double>(m.at(t, 4 * i)))) << ","
         << detail::fmt_short(py(static_cast<double>(m.at(t, 4 * i + 1))))
         << (t + 1 < t1 ? " " : "");
    os << "\"/>\n";
  };
  const int64_t ctx_end = std::min(context, truth.rows);
  for (int32_t i = 0; i < n_objects; ++i) {
    const char* color = detail::series_color(i);
    polyline(truth, i, 0, ctx_end, color, "", 1.0);
    polyline(truth, i, std::max<int64_t>(ctx_end - 1, 0), truth.rows, color, "", 2.0);
    polyline(pred, i, 0, pred.rows, color, "6,4", 2.0);
    if (truth.rows > 0)
      os << "<circle cx=\"" << detail::fmt_short(px(static_cast<double>(truth.at(0, 4 * i))))
         << "\" cy=\"" << detail::fmt_short(py(static_cast<double>(truth.at(0, 4 * i + 1))))
         << "\" r=\"3\" fill=\"" << color << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// Per-pair edge probability, P(any non-none type), averaged over the two
// directions; diagonal is zero by construction.
template <class T>
Tensor<double> edge_score_matrix(const model::EdgeBelief<T>& belief, int64_t episode) {
  check<InvalidArgument>(episode >= 0 && episode < belief.batch, "edge_score_matrix: episode ",
                         episode, " out of batch ", belief.batch);
  const int32_t n = belief.n;
  const int64_t per_ep = static_cast<int64_t>(n) * (n - 1);
  Tensor<double> m(n, n);
  auto p_edge = [&](int32_t i, int32_t j) {
    const int64_t row = episode * per_ep + model::pair_slot(n, i, j);
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t k = 0; k < belief.types; ++k)
      mx = std::max(mx, static_cast<double>(belief.logits.at(row, k)));
    double z = 0.0, none = 0.0;
    for (int64_t k = 0; k < belief.types; ++k) {
      const double e = std::exp(static_cast<double>(belief.logits.at(row, k)) - mx);
      z += e;
      if (k == 0) none = e;
    }
    return 1.0 - none / z;
  };
  for (int32_t i = 0; i < n; ++i)
    for (int32_t j = 0; j < n; ++j) {
      if (i == j) continue;
      m.at(i, j) = 0.5 * (p_edge(i, j) + p_edge(j, i));
    }
  return m;
}

inline std::string heatmap_csv(const Tensor<double>& m) {
  std::ostringstream os;
  os.precision(17);
  for (int64_t i = 0; i < m.rows; ++i) {
    for (int64_t j = 0; j < m.cols; ++j) os << (j ? "," : "") << m.at(i, j);
    os << "\n";
  }
  return os.str();
}

// Grayscale grid, dark = high score, value printed in each cell.
inline std::string heatmap_svg(const Tensor<double>& m, int64_t cell = 48) {
  const int64_t w = m.cols * cell, h = m.rows * cell;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  for (int64_t i = 0; i < m.rows; ++i)
    for (int64_t j = 0; j < m.cols; ++j) {
      const double v = std::clamp(m.at(i, j), 0.0, 1.0);
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      os << "<rect x=\"" << j * cell << "\" y=\"" << i * cell << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << "," << shade << "," << shade
         << ")\" stroke=\"#888\"/>\n";
      os << "<text x=\"" << j * cell + cell / 2 << "\" y=\"" << i * cell + cell / 2
         << "\" font-size=\"" << cell / 4 << "\" text-anchor=\"middle\" dominant-baseline=\"middle\" fill=\""
         << (v > 0.5 ? "white" : "black") << "\">" << detail::fmt_short(m.at(i, j)) << "</text>\n";
    }
  os << "</svg>\n";
  return os.str();
}

}  // namespace rein::expkit
