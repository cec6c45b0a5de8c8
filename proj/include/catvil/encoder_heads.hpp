#pragma once

#include <string>
#include <vector>

#include "catvil/attention.hpp"
#include "catvil/synth_data.hpp"

namespace catvil {

struct EncoderConfig {
  int depth = 2;
  AttentionConfig attention;
};

/// Pre-norm transformer block: x + MHA(LN(x)), then x + FFN(LN(x)) with GELU.
struct EncoderBlockParams {
  LayerNormParams norm1;
  MHAParams attention;
  LayerNormParams norm2;
  Linear ffn1;
  Linear ffn2;

  EncoderBlockParams() = default;
  explicit EncoderBlockParams(const AttentionConfig& cfg);
  void init(Rng& rng);
  void collect(ParamList& out, const std::string& prefix);
};

struct EncoderParams {
  EncoderConfig config;
  Param cls;  // 1 x d, prepended to the fused sequence
  std::vector<EncoderBlockParams> blocks;
  LayerNormParams final_norm;

  EncoderParams() = default;
  explicit EncoderParams(const EncoderConfig& cfg);
  void init(Rng& rng, double cls_stddev = 0.02);
  void collect(ParamList& out, const std::string& prefix);
};

struct EncodedSequence {
  ad::Var cls;       // 1 x d
  ad::Var sequence;  // L x d (CLS row removed)
};

EncodedSequence encode_sequence(ad::Graph& g, ad::Var fused, EncoderParams& params, const RowMask& mask = {});

/// Center-form box with every coordinate in (0, 1).
struct PredictedBox {
  double cx = 0.5, cy = 0.5, w = 0.5, h = 0.5;
};

BoundingBox box_to_corners(const PredictedBox& b);
PredictedBox corners_to_center(const BoundingBox& b);

struct ClassifierHead {
  Linear linear;

  ClassifierHead() = default;
  ClassifierHead(int dim, int num_classes) : linear(dim, num_classes) {}
  void init(Rng& rng) { linear.init(rng); }
  void collect(ParamList& out, const std::string& prefix) { linear.collect(out, prefix + ".linear"); }
};

/// Three-layer perceptron (ReLU between layers) ending in a 4-way projection and a sigmoid.
struct BoxHead {
  Linear layer1;
  Linear layer2;
  Linear projection;

  BoxHead() = default;
  explicit BoxHead(int dim);
  void init(Rng& rng);
  void collect(ParamList& out, const std::string& prefix);
};

ad::Var class_logits(ad::Graph& g, ad::Var cls_out, ClassifierHead& head);
/// Softmax over class_logits.
ad::Var classify(ad::Graph& g, ad::Var cls_out, ClassifierHead& head);
Eigen::RowVectorXd classify(const Eigen::RowVectorXd& cls_out, ClassifierHead& head);

/// 1x4 (cx, cy, w, h).
ad::Var localize(ad::Graph& g, ad::Var cls_out, BoxHead& head);
PredictedBox localize(const Eigen::RowVectorXd& cls_out, BoxHead& head);
PredictedBox to_predicted_box(const Matrix& row);

}  // namespace catvil
