#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Graph records every operation applied to its Vars. Calling backward() on a
// 1x1 Var walks the record in reverse creation order, which is a valid
// topological order because a node can only reference nodes created before it.
// Parameters enter the graph through Graph::param() and receive their
// gradients in Param::grad when backward() reaches them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace catvil {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-row validity flags used as key-padding masks; empty means every row is valid.
using RowMask = std::vector<std::uint8_t>;

/// A trainable tensor together with its accumulated gradient.
struct Param {
  Matrix value;
  Matrix grad;

  Param() = default;
  explicit Param(Matrix v) : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  Param(Eigen::Index rows, Eigen::Index cols)
      : value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

namespace ad {

class Graph;

/// Handle to a node in a Graph. Cheap to copy; only valid while its Graph lives.
struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = 0;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

enum class GradMode { kRecord, kInference };

class Graph {
 public:
  using Backward = std::function<void(Graph&, std::uint32_t)>;

  explicit Graph(GradMode mode = GradMode::kRecord) : mode_(mode) { nodes_.reserve(256); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return mode_ == GradMode::kRecord; }

  /// Constant input; no gradient flows into it.
  Var constant(Matrix value);
  /// Differentiable leaf whose gradient can be read back with grad().
  Var leaf(Matrix value);
  /// Parameter leaf; repeated calls with the same Param return the same node.
  Var param(Param& p);

  /// Seeds d(root)/d(root) = 1 and propagates. root must be 1x1.
  void backward(Var root);

  const Matrix& value(Var v) const { return value(v.id); }
  const Matrix& value(std::uint32_t id) const;
  /// Gradient of a leaf after backward(); zero matrix if nothing reached it.
  Matrix grad(Var v) const;

  // Interface used by op implementations.
  Var emit(Matrix value, std::initializer_list<Var> parents, Backward backward);
  Var emit(Matrix value, std::span<const Var> parents, Backward backward);
  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }
  /// Gradient buffer of a node, allocated as zeros on first use.
  Matrix& grad_buffer(std::uint32_t id);
  const Matrix& upstream(std::uint32_t id) const { return nodes_[id].grad; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;  // parameters are referenced, not copied
    Param* param = nullptr;
    Matrix grad;
    Backward backward;
    bool needs_grad = false;
  };

  GradMode mode_;
  std::vector<Node> nodes_;
  std::unordered_map<const Param*, std::uint32_t> param_ids_;
};

// ---- operations -----------------------------------------------------------

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var minimum(Var a, Var b);
Var maximum(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
/// 1 - a
Var one_minus(Var a);
/// Adds a 1xC row vector to every row of a.
Var add_row(Var a, Var row);
/// Multiplies every column of a by the Rx1 column vector col.
Var mul_col(Var a, Var col);
Var clamp(Var a, double lo, double hi);
Var abs(Var a);
Var relu(Var a);
Var gelu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
/// Numerically stable row softmax. Columns with mask[c] == 0 receive weight 0.
Var softmax_rows(Var a, const RowMask& column_mask = {});
/// Row-wise layer normalization with 1xC gamma and beta.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var sum(Var a);
Var mean(Var a);
Var slice_cols(Var a, Eigen::Index first, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index first, Eigen::Index count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
/// Zero-pads a at the tail to `rows` rows.
Var pad_rows(Var a, Eigen::Index rows);
/// Row lookup: out.row(i) = table.row(ids[i]).
Var gather_rows(Var table, std::span<const int> ids);
/// Negative log of softmax(logits)[target] with probabilities clamped at 1e-12.
Var cross_entropy_logits(Var logits, int target);
/// Unfolds an (H*W)xC feature map into (H*W)x(k*k*C) zero-padded 'same' windows.
Var im2col(Var a, int height, int width, int kernel);
/// Average pooling of an (H*W)xC map by a factor along both spatial axes.
Var avg_pool(Var a, int height, int width, int factor);

}  // namespace ad
}  // namespace catvil
