#include "catvil/encoder_heads.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace catvil {

EncoderBlockParams::EncoderBlockParams(const AttentionConfig& cfg)
    : norm1(cfg.dim), attention(cfg), norm2(cfg.dim), ffn1(cfg.dim, cfg.ffn_hidden), ffn2(cfg.ffn_hidden, cfg.dim) {}

void EncoderBlockParams::init(Rng& rng) {
  attention.init(rng);
  ffn1.init(rng);
  ffn2.init(rng);
}

void EncoderBlockParams::collect(ParamList& out, const std::string& prefix) {
  norm1.collect(out, prefix + ".ln1");
  attention.collect(out, prefix + ".mha");
  norm2.collect(out, prefix + ".ln2");
  ffn1.collect(out, prefix + ".ffn1");
  ffn2.collect(out, prefix + ".ffn2");
}

EncoderParams::EncoderParams(const EncoderConfig& cfg)
    : config(cfg), cls(1, cfg.attention.dim), final_norm(cfg.attention.dim) {
  if (cfg.depth < 0) throw std::invalid_argument("EncoderConfig: depth must be >= 0");
  cfg.attention.validate();
  for (int i = 0; i < cfg.depth; ++i) blocks.emplace_back(cfg.attention);
}

void EncoderParams::init(Rng& rng, double cls_stddev) {
  init_normal(cls, cls_stddev, rng);
  for (auto& b : blocks) b.init(rng);
}

void EncoderParams::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".cls", &cls});
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(out, prefix + ".block" + std::to_string(i));
  final_norm.collect(out, prefix + ".final_ln");
}

EncodedSequence encode_sequence(ad::Graph& g, ad::Var fused, EncoderParams& params, const RowMask& mask) {
  const auto& cfg = params.config.attention;
  if (fused.cols() != cfg.dim) {
    throw std::invalid_argument("encode_sequence: input width " + std::to_string(fused.cols()) + " != model dim " +
                                std::to_string(cfg.dim));
  }
  RowMask keys;
  if (!mask.empty()) {
    if (static_cast<Eigen::Index>(mask.size()) != fused.rows()) {
      throw std::invalid_argument("encode_sequence: mask length mismatch");
    }
    keys.reserve(mask.size() + 1);
    keys.push_back(1);
    keys.insert(keys.end(), mask.begin(), mask.end());
  }
  std::array<ad::Var, 2> parts{g.param(params.cls), fused};
  ad::Var x = ad::concat_rows(parts);
  for (auto& b : params.blocks) {
    ad::Var h = b.norm1(g, x);
    x = ad::add(x, multi_head_attention(g, h, h, h, b.attention, cfg, keys));
    ad::Var f = b.ffn2(g, ad::gelu(b.ffn1(g, b.norm2(g, x))));
    x = ad::add(x, f);
  }
  x = params.final_norm(g, x);
  return {ad::slice_rows(x, 0, 1), ad::slice_rows(x, 1, x.rows() - 1)};
}

BoundingBox box_to_corners(const PredictedBox& b) {
  return {std::clamp(b.cx - b.w / 2, 0.0, 1.0), std::clamp(b.cy - b.h / 2, 0.0, 1.0),
          std::clamp(b.cx + b.w / 2, 0.0, 1.0), std::clamp(b.cy + b.h / 2, 0.0, 1.0)};
}

PredictedBox corners_to_center(const BoundingBox& b) {
  return {(b.x1 + b.x2) / 2, (b.y1 + b.y2) / 2, b.x2 - b.x1, b.y2 - b.y1};
}

BoxHead::BoxHead(int dim) : layer1(dim, dim), layer2(dim, dim), projection(dim, 4) {}

void BoxHead::init(Rng& rng) {
  layer1.init(rng);
  layer2.init(rng);
  projection.init(rng);
}

void BoxHead::collect(ParamList& out, const std::string& prefix) {
  layer1.collect(out, prefix + ".layer1");
  layer2.collect(out, prefix + ".layer2");
  projection.collect(out, prefix + ".projection");
}

ad::Var class_logits(ad::Graph& g, ad::Var cls_out, ClassifierHead& head) { return head.linear(g, cls_out); }

ad::Var classify(ad::Graph& g, ad::Var cls_out, ClassifierHead& head) {
  return ad::softmax_rows(class_logits(g, cls_out, head));
}

Eigen::RowVectorXd classify(const Eigen::RowVectorXd& cls_out, ClassifierHead& head) {
  ad::Graph g(ad::GradMode::kInference);
  return classify(g, g.constant(Matrix(cls_out)), head).value().row(0);
}

ad::Var localize(ad::Graph& g, ad::Var cls_out, BoxHead& head) {
  ad::Var h = ad::relu(head.layer1(g, cls_out));
  h = ad::relu(head.layer2(g, h));
  return ad::sigmoid(head.projection(g, h));
}

PredictedBox localize(const Eigen::RowVectorXd& cls_out, BoxHead& head) {
  ad::Graph g(ad::GradMode::kInference);
  return to_predicted_box(localize(g, g.constant(Matrix(cls_out)), head).value());
}

PredictedBox to_predicted_box(const Matrix& row) {
  if (row.rows() != 1 || row.cols() != 4) throw std::invalid_argument("to_predicted_box: expected a 1x4 row");
  return {row(0, 0), row(0, 1), row(0, 2), row(0, 3)};
}

}  // namespace catvil
