#pragma once

// Independent reference implementations written with plain loops, shared by the
// unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "catvil/attention.hpp"
#include "catvil/synth_data.hpp"

namespace catvil::testing {

/// Multi-head attention evaluated entry by entry, one head at a time.
inline Matrix loop_multi_head_attention(const Matrix& xq, const Matrix& xk, const Matrix& xv, const MHAParams& p,
                                        int heads, const RowMask& key_mask = {}) {
  const auto d = xq.cols();
  const auto hd = d / heads;
  auto project = [](const Matrix& x, const Linear& l) {
    Matrix out(x.rows(), l.weight.value.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        double acc = l.has_bias ? l.bias.value(0, j) : 0.0;
        for (Eigen::Index k = 0; k < x.cols(); ++k) acc += x(i, k) * l.weight.value(k, j);
        out(i, j) = acc;
      }
    return out;
  };
  const Matrix q = project(xq, p.query), k = project(xk, p.key), v = project(xv, p.value);
  Matrix concat = Matrix::Zero(xq.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const auto off = h * hd;
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      std::vector<double> scores(static_cast<std::size_t>(k.rows()));
      double peak = -INFINITY;
      for (Eigen::Index j = 0; j < k.rows(); ++j) {
        if (!key_mask.empty() && !key_mask[static_cast<std::size_t>(j)]) continue;
        double s = 0;
        for (Eigen::Index c = 0; c < hd; ++c) s += q(i, off + c) * k(j, off + c);
        scores[static_cast<std::size_t>(j)] = s / std::sqrt(static_cast<double>(hd));
        peak = std::max(peak, scores[static_cast<std::size_t>(j)]);
      }
      double total = 0;
      std::vector<double> w(scores.size(), 0.0);
      for (std::size_t j = 0; j < scores.size(); ++j) {
        if (!key_mask.empty() && !key_mask[j]) continue;
        w[j] = std::exp(scores[j] - peak);
        total += w[j];
      }
      for (Eigen::Index c = 0; c < hd; ++c) {
        double acc = 0;
        for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] / total * v(static_cast<Eigen::Index>(j), off + c);
        concat(i, off + c) = acc;
      }
    }
  }
  return project(concat, p.output);
}

/// Box areas by counting cell centers of an n x n grid over [lo, hi]^2.
inline double raster_giou(const BoundingBox& a, const BoundingBox& b, double lo, double hi, int n = 512) {
  const double cell = (hi - lo) / n;
  const BoundingBox c{std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
  auto inside = [](const BoundingBox& r, double x, double y) { return x >= r.x1 && x < r.x2 && y >= r.y1 && y < r.y2; };
  long inter = 0, uni = 0, enc = 0;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      const double x = lo + (ix + 0.5) * cell, y = lo + (iy + 0.5) * cell;
      const bool ia = inside(a, x, y), ib = inside(b, x, y);
      inter += ia && ib;
      uni += ia || ib;
      enc += inside(c, x, y);
    }
  const double iou = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
  return iou - (enc ? static_cast<double>(enc - uni) / static_cast<double>(enc) : 0.0);
}

}  // namespace catvil::testing
