#include "catvil/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace catvil::ad {

const Matrix& Var::value() const { return graph->value(id); }

const Matrix& Graph::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external != nullptr ? *n.external : n.value;
}

Var Graph::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::leaf(Matrix value) {
  Var v = constant(std::move(value));
  nodes_[v.id].needs_grad = recording();
  return v;
}

Var Graph::param(Param& p) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) return Var{this, it->second};
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.needs_grad = recording();
  nodes_.push_back(std::move(n));
  auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  param_ids_.emplace(&p, id);
  return Var{this, id};
}

Var Graph::emit(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  return emit(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
}

Var Graph::emit(Matrix value, std::span<const Var> parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  if (recording()) {
    for (const Var& p : parents) {
      if (p.graph != this) throw std::logic_error("ad: mixing Vars from different graphs");
      if (nodes_[p.id].needs_grad) n.needs_grad = true;
    }
    if (n.needs_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Matrix& Graph::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Matrix& v = value(id);
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

Matrix Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Matrix::Zero(value(v.id).rows(), value(v.id).cols());
  return n.grad;
}

void Graph::backward(Var root) {
  if (!recording()) throw std::logic_error("ad: backward() on an inference graph");
  if (root.graph != this) throw std::logic_error("ad: root belongs to another graph");
  const Matrix& rv = value(root.id);
  if (rv.rows() != 1 || rv.cols() != 1) throw std::invalid_argument("ad: backward() root must be 1x1");
  if (!nodes_[root.id].needs_grad) return;
  grad_buffer(root.id)(0, 0) += 1.0;
  for (std::int64_t i = root.id; i >= 0; --i) {
    auto id = static_cast<std::uint32_t>(i);
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

namespace {

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string("ad::") + op + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

template <typename F, typename D>
Var unary(Var a, F forward, D derivative) {
  Graph& g = *a.graph;
  Matrix out = a.value().unaryExpr(forward);
  return g.emit(std::move(out), {a}, [a = a.id, derivative](Graph& gr, std::uint32_t self) {
    if (!gr.needs_grad(a)) return;
    const Matrix& x = gr.value(a);
    const Matrix& y = gr.value(self);
    const Matrix& up = gr.upstream(self);
    Matrix& ga = gr.grad_buffer(a);
    for (Eigen::Index i = 0; i < x.size(); ++i) ga.data()[i] += up.data()[i] * derivative(x.data()[i], y.data()[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("ad::matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                                std::to_string(b.rows()) + " differ");
  }
  Matrix out;
  out.noalias() = a.value() * b.value();
  return a.graph->emit(std::move(out), {a, b}, [a = a.id, b = b.id](Graph& g, std::uint32_t self) {
    const Matrix& up = g.upstream(self);
    if (g.needs_grad(a)) g.grad_buffer(a).noalias() += up * g.value(b).transpose();
    if (g.needs_grad(b)) g.grad_buffer(b).noalias() += g.value(a).transpose() * up;
  });
}

Var matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("ad::matmul_nt: inner dimensions " + std::to_string(a.cols()) + " and " +
                                std::to_string(b.cols()) + " differ");
  }
  Matrix out;
  out.noalias() = a.value() * b.value().transpose();
  return a.graph->emit(std::move(out), {a, b}, [a = a.id, b = b.id](Graph& g, std::uint32_t self) {
    const Matrix& up = g.upstream(self);
    if (g.needs_grad(a)) g.grad_buffer(a).noalias() += up * g.value(b);
    if (g.needs_grad(b)) g.grad_buffer(b).noalias() += up.transpose() * g.value(a);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  return a.graph->emit(a.value() + b.value(), {a, b}, [a = a.id, b = b.id](Graph& g, std::uint32_t self) {
    const Matrix& up = g.upstream(self);
    if (g.needs_grad(a)) g.grad_buffer(a) += up;
    if (g.needs_grad(b)) g.grad_buffer(b) += up;
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  return a.graph->emit(a.value() - b.value(), {a, b}, [a = a.id, b = b.id](Graph& g, std::uint32_t self) {
    const Matrix& up = g.upstream(self);
    if (g.needs_grad(a)) g.grad_buffer(a) += up;
    if (g.needs_grad(b)) g.grad_buffer(b) -= up;
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  return a.graph->emit(a.value().cwiseProduct(b.value()), {a, b}, [a = a.id, b = b.id](Graph& g, std::uint32_t self) {
    const Matrix& up = g.upstream(self);
    if (g.needs_grad(a)) g.grad_buffer(a) += up.cwiseProduct(g.value(b));
    if (g.needs_grad(b)) g.grad_buffer(b) += up.cwiseProduct(g.value(a));
  });
}

Var div(Var a, Var b) {
  require_same_shape(a, b, "div");
  return a.graph->emit(a.value().cwiseQuotient(b.value()), {a, b}, [a = a.id, b = b.id](Graph& g, std::uint32_t self) {
    const Matrix& up = g.upstream(self);
    const Matrix& bv = g.value(b);
    if (g.needs_grad(a)) g.grad_buffer(a) += up.cwiseQuotient(bv);
    if (g.needs_grad(b)) g.grad_buffer(b) -= up.cwiseProduct(g.value(self)).cwiseQuotient(bv);
  });
}

Var minimum(Var a, Var b) {
  require_same_shape(a, b, "minimum");
  return a.graph->emit(a.value().cwiseMin(b.value()), {a, b}, [a = a.id, b = b.id](Graph& g, std::uint32_t self) {
    const Matrix& up = g.upstream(self);
    const Matrix& av = g.value(a);
    const Matrix& bv = g.value(b);
    for (Eigen::Index i = 0; i < up.size(); ++i) {
      bool take_a = av.data()[i] <= bv.data()[i];
      if (take_a && g.needs_grad(a)) g.grad_buffer(a).data()[i] += up.data()[i];
      if (!take_a && g.needs_grad(b)) g.grad_buffer(b).data()[i] += up.data()[i];
    }
  });
}

Var maximum(Var a, Var b) {
  require_same_shape(a, b, "maximum");
  return a.graph->emit(a.value().cwiseMax(b.value()), {a, b}, [a = a.id, b = b.id](Graph& g, std::uint32_t self) {
    const Matrix& up = g.upstream(self);
    const Matrix& av = g.value(a);
    const Matrix& bv = g.value(b);
    for (Eigen::Index i = 0; i < up.size(); ++i) {
      bool take_a = av.data()[i] >= bv.data()[i];
      if (take_a && g.needs_grad(a)) g.grad_buffer(a).data()[i] += up.data()[i];
      if (!take_a && g.needs_grad(b)) g.grad_buffer(b).data()[i] += up.data()[i];
    }
  });
}

Var scale(Var a, double c) {
  return a.graph->emit(a.value() * c, {a}, [a = a.id, c](Graph& g, std::uint32_t self) {
    if (g.needs_grad(a)) g.grad_buffer(a) += c * g.upstream(self);
  });
}

Var add_scalar(Var a, double c) {
  return a.graph->emit(a.value().array() + c, {a}, [a = a.id](Graph& g, std::uint32_t self) {
    if (g.needs_grad(a)) g.grad_buffer(a) += g.upstream(self);
  });
}

Var one_minus(Var a) {
  return a.graph->emit(1.0 - a.value().array(), {a}, [a = a.id](Graph& g, std::uint32_t self) {
    if (g.needs_grad(a)) g.grad_buffer(a) -= g.upstream(self);
  });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw std::invalid_argument("ad::add_row: expected a 1x" + std::to_string(a.cols()) + " row");
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.graph->emit(std::move(out), {a, row}, [a = a.id, r = row.id](Graph& g, std::uint32_t self) {
    const Matrix& up = g.upstream(self);
    if (g.needs_grad(a)) g.grad_buffer(a) += up;
    if (g.needs_grad(r)) g.grad_buffer(r) += up.colwise().sum();
  });
}

Var mul_col(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw std::invalid_argument("ad::mul_col: expected a " + std::to_string(a.rows()) + "x1 column");
  }
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return a.graph->emit(std::move(out), {a, col}, [a = a.id, c = col.id](Graph& g, std::uint32_t self) {
    const Matrix& up = g.upstream(self);
    if (g.needs_grad(a)) g.grad_buffer(a).array() += up.array().colwise() * g.value(c).col(0).array();
    if (g.needs_grad(c)) g.grad_buffer(c) += up.cwiseProduct(g.value(a)).rowwise().sum();
  });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var abs(Var a) {
  return unary(
      a, [](double x) { return std::abs(x); }, [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var gelu(Var a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x); });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var softmax_rows(Var a, const RowMask& column_mask) {
  const Matrix& x = a.value();
  if (!column_mask.empty() && static_cast<Eigen::Index>(column_mask.size()) != x.cols()) {
    throw std::invalid_argument("ad::softmax_rows: mask length does not match column count");
  }
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      double v = x(r, c);
      if (std::isnan(v)) throw std::domain_error("softmax_rows: NaN input");
      if (column_mask.empty() || column_mask[c]) m = std::max(m, v);
    }
    if (!std::isfinite(m)) throw std::domain_error("softmax_rows: row has no finite unmasked entry");
    double total = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      double e = (column_mask.empty() || column_mask[c]) ? std::exp(x(r, c) - m) : 0.0;
      out(r, c) = e;
      total += e;
    }
    out.row(r) /= total;
  }
  return a.graph->emit(std::move(out), {a}, [a = a.id](Graph& g, std::uint32_t self) {
    if (!g.needs_grad(a)) return;
    const Matrix& y = g.value(self);
    const Matrix& up = g.upstream(self);
    Eigen::VectorXd dots = up.cwiseProduct(y).rowwise().sum();
    g.grad_buffer(a).array() += y.array() * (up.array().colwise() - dots.array());
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Matrix& xv = x.value();
  const Eigen::Index n = xv.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n) {
    throw std::invalid_argument("ad::layer_norm: gamma/beta must be 1x" + std::to_string(n));
  }
  Matrix xhat(xv.rows(), n);
  Eigen::VectorXd rstd(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    double mu = xv.row(r).mean();
    double var = (xv.row(r).array() - mu).square().mean();
    rstd(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * rstd(r);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  return x.graph->emit(std::move(out), {x, gamma, beta},
                       [x = x.id, ga = gamma.id, be = beta.id, xhat = std::move(xhat), rstd = std::move(rstd)](
                           Graph& g, std::uint32_t self) {
                         const Matrix& up = g.upstream(self);
                         if (g.needs_grad(ga)) g.grad_buffer(ga) += up.cwiseProduct(xhat).colwise().sum();
                         if (g.needs_grad(be)) g.grad_buffer(be) += up.colwise().sum();
                         if (!g.needs_grad(x)) return;
                         Matrix dxhat = up.array().rowwise() * g.value(ga).row(0).array();
                         Matrix& gx = g.grad_buffer(x);
                         for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                           double m1 = dxhat.row(r).mean();
                           double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                           gx.row(r).array() += rstd(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                         }
                       });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.graph->emit(std::move(out), {a}, [a = a.id](Graph& g, std::uint32_t self) {
    if (g.needs_grad(a)) g.grad_buffer(a).array() += g.upstream(self)(0, 0);
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var slice_cols(Var a, Eigen::Index first, Eigen::Index count) {
  if (first < 0 || count < 0 || first + count > a.cols()) throw std::out_of_range("ad::slice_cols: range outside matrix");
  Matrix out = a.value().middleCols(first, count);
  return a.graph->emit(std::move(out), {a}, [a = a.id, first, count](Graph& g, std::uint32_t self) {
    if (g.needs_grad(a)) g.grad_buffer(a).middleCols(first, count) += g.upstream(self);
  });
}

Var slice_rows(Var a, Eigen::Index first, Eigen::Index count) {
  if (first < 0 || count < 0 || first + count > a.rows()) throw std::out_of_range("ad::slice_rows: range outside matrix");
  Matrix out = a.value().middleRows(first, count);
  return a.graph->emit(std::move(out), {a}, [a = a.id, first, count](Graph& g, std::uint32_t self) {
    if (g.needs_grad(a)) g.grad_buffer(a).middleRows(first, count) += g.upstream(self);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ad::concat_cols: no inputs");
  Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("ad::concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::uint32_t, Eigen::Index>> spans;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    spans.emplace_back(p.id, at);
    at += p.cols();
  }
  return parts[0].graph->emit(std::move(out), parts, [spans = std::move(spans)](Graph& g, std::uint32_t self) {
    const Matrix& up = g.upstream(self);
    for (auto [id, off] : spans) {
      if (g.needs_grad(id)) g.grad_buffer(id) += up.middleCols(off, g.value(id).cols());
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ad::concat_rows: no inputs");
  Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("ad::concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::uint32_t, Eigen::Index>> spans;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    spans.emplace_back(p.id, at);
    at += p.rows();
  }
  return parts[0].graph->emit(std::move(out), parts, [spans = std::move(spans)](Graph& g, std::uint32_t self) {
    const Matrix& up = g.upstream(self);
    for (auto [id, off] : spans) {
      if (g.needs_grad(id)) g.grad_buffer(id) += up.middleRows(off, g.value(id).rows());
    }
  });
}

Var pad_rows(Var a, Eigen::Index rows) {
  if (rows < a.rows()) throw std::invalid_argument("ad::pad_rows: target shorter than input");
  if (rows == a.rows()) return a;
  Matrix out = Matrix::Zero(rows, a.cols());
  out.topRows(a.rows()) = a.value();
  return a.graph->emit(std::move(out), {a}, [a = a.id](Graph& g, std::uint32_t self) {
    if (g.needs_grad(a)) g.grad_buffer(a) += g.upstream(self).topRows(g.value(a).rows());
  });
}

Var gather_rows(Var table, std::span<const int> ids) {
  const Matrix& t = table.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows()) {
      throw std::out_of_range("ad::gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                              std::to_string(t.rows()) + " rows");
    }
    out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return table.graph->emit(std::move(out), {table}, [t = table.id, idx = std::move(idx)](Graph& g, std::uint32_t self) {
    if (!g.needs_grad(t)) return;
    const Matrix& up = g.upstream(self);
    Matrix& gt = g.grad_buffer(t);
    for (std::size_t i = 0; i < idx.size(); ++i) gt.row(idx[i]) += up.row(static_cast<Eigen::Index>(i));
  });
}

Var cross_entropy_logits(Var logits, int target) {
  const Matrix& z = logits.value();
  if (z.rows() != 1) throw std::invalid_argument("ad::cross_entropy_logits: expects a single row of logits");
  if (target < 0 || target >= z.cols()) {
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) + " outside [0, " +
                            std::to_string(z.cols()) + ")");
  }
  Eigen::RowVectorXd p = (z.row(0).array() - z.maxCoeff()).exp();
  p /= p.sum();
  const bool clamped = p(target) < 1e-12;
  Matrix out(1, 1);
  out(0, 0) = -std::log(std::max(p(target), 1e-12));
  return logits.graph->emit(std::move(out), {logits},
                            [z = logits.id, p = std::move(p), target, clamped](Graph& g, std::uint32_t self) {
                              if (!g.needs_grad(z) || clamped) return;
                              double up = g.upstream(self)(0, 0);
                              Eigen::RowVectorXd d = p;
                              d(target) -= 1.0;
                              g.grad_buffer(z).row(0) += up * d;
                            });
}

Var im2col(Var a, int height, int width, int kernel) {
  const Matrix& x = a.value();
  if (x.rows() != static_cast<Eigen::Index>(height) * width) {
    throw std::invalid_argument("ad::im2col: row count does not match height*width");
  }
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("ad::im2col: kernel must be odd");
  const Eigen::Index ch = x.cols();
  const int pad = kernel / 2;
  Matrix out = Matrix::Zero(x.rows(), ch * kernel * kernel);
  for (int y = 0; y < height; ++y) {
    for (int xx = 0; xx < width; ++xx) {
      for (int ky = 0; ky < kernel; ++ky) {
        int sy = y + ky - pad;
        if (sy < 0 || sy >= height) continue;
        for (int kx = 0; kx < kernel; ++kx) {
          int sx = xx + kx - pad;
          if (sx < 0 || sx >= width) continue;
          out.block(y * width + xx, (ky * kernel + kx) * ch, 1, ch) = x.row(sy * width + sx);
        }
      }
    }
  }
  return a.graph->emit(std::move(out), {a}, [a = a.id, height, width, kernel](Graph& g, std::uint32_t self) {
    if (!g.needs_grad(a)) return;
    const Matrix& up = g.upstream(self);
    Matrix& ga = g.grad_buffer(a);
    const Eigen::Index ch = ga.cols();
    const int pad = kernel / 2;
    for (int y = 0; y < height; ++y) {
      for (int xx = 0; xx < width; ++xx) {
        for (int ky = 0; ky < kernel; ++ky) {
          int sy = y + ky - pad;
          if (sy < 0 || sy >= height) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            int sx = xx + kx - pad;
            if (sx < 0 || sx >= width) continue;
            ga.row(sy * width + sx) += up.block(y * width + xx, (ky * kernel + kx) * ch, 1, ch);
          }
        }
      }
    }
  });
}

Var avg_pool(Var a, int height, int width, int factor) {
  const Matrix& x = a.value();
  if (x.rows() != static_cast<Eigen::Index>(height) * width) {
    throw std::invalid_argument("ad::avg_pool: row count does not match height*width");
  }
  if (factor < 1 || height % factor != 0 || width % factor != 0) {
    throw std::invalid_argument("ad::avg_pool: spatial dims not divisible by pooling factor");
  }
  const int oh = height / factor;
  const int ow = width / factor;
  const double inv = 1.0 / (factor * factor);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(oh) * ow, x.cols());
  for (int y = 0; y < height; ++y) {
    for (int xx = 0; xx < width; ++xx) out.row((y / factor) * ow + xx / factor) += inv * x.row(y * width + xx);
  }
  return a.graph->emit(std::move(out), {a}, [a = a.id, height, width, factor, ow, inv](Graph& g, std::uint32_t self) {
    if (!g.needs_grad(a)) return;
    const Matrix& up = g.upstream(self);
    Matrix& ga = g.grad_buffer(a);
    for (int y = 0; y < height; ++y) {
      for (int xx = 0; xx < width; ++xx) ga.row(y * width + xx) += inv * up.row((y / factor) * ow + xx / factor);
    }
  });
}

}  // namespace catvil::ad
