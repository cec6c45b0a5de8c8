#include "catvil/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace catvil {

void AttentionConfig::validate() const {
  if (dim < 1 || heads < 1 || ffn_hidden < 1) throw std::invalid_argument("AttentionConfig: dimensions must be >= 1");
  if (dim % heads != 0) {
    throw std::invalid_argument("AttentionConfig: dim " + std::to_string(dim) + " not divisible by " +
                                std::to_string(heads) + " heads");
  }
}

MHAParams::MHAParams(const AttentionConfig& cfg)
    : query(cfg.dim, cfg.dim), key(cfg.dim, cfg.dim), value(cfg.dim, cfg.dim), output(cfg.dim, cfg.dim) {
  cfg.validate();
}

void MHAParams::init(Rng& rng) {
  query.init(rng);
  key.init(rng);
  value.init(rng);
  output.init(rng);
}

void MHAParams::collect(ParamList& out, const std::string& prefix) {
  query.collect(out, prefix + ".q");
  key.collect(out, prefix + ".k");
  value.collect(out, prefix + ".v");
  output.collect(out, prefix + ".o");
}

AttentionBlockParams::AttentionBlockParams(const AttentionConfig& cfg)
    : attention(cfg), norm1(cfg.dim), ffn1(cfg.dim, cfg.ffn_hidden), ffn2(cfg.ffn_hidden, cfg.dim), norm2(cfg.dim) {}

void AttentionBlockParams::init(Rng& rng) {
  attention.init(rng);
  ffn1.init(rng);
  ffn2.init(rng);
}

void AttentionBlockParams::collect(ParamList& out, const std::string& prefix) {
  attention.collect(out, prefix + ".mha");
  norm1.collect(out, prefix + ".ln1");
  ffn1.collect(out, prefix + ".ffn1");
  ffn2.collect(out, prefix + ".ffn2");
  norm2.collect(out, prefix + ".ln2");
}

Matrix softmax_rows(const Matrix& m) {
  ad::Graph g(ad::GradMode::kInference);
  return ad::softmax_rows(g.constant(m)).value();
}

Matrix scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v) {
  ad::Graph g(ad::GradMode::kInference);
  return scaled_dot_attention(g, g.constant(q), g.constant(k), g.constant(v)).value();
}

ad::Var scaled_dot_attention(ad::Graph& g, ad::Var q, ad::Var k, ad::Var v, const RowMask& key_mask,
                             Matrix* weights) {
  if (q.cols() != k.cols()) {
    throw std::invalid_argument("scaled_dot_attention: query width " + std::to_string(q.cols()) +
                                " != key width " + std::to_string(k.cols()));
  }
  if (k.rows() != v.rows()) {
    throw std::invalid_argument("scaled_dot_attention: " + std::to_string(k.rows()) + " keys but " +
                                std::to_string(v.rows()) + " values");
  }
  (void)g;
  ad::Var scores = ad::scale(ad::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q.cols())));
  ad::Var w = ad::softmax_rows(scores, key_mask);
  if (weights != nullptr) *weights = w.value();
  return ad::matmul(w, v);
}

ad::Var multi_head_attention(ad::Graph& g, ad::Var q_seq, ad::Var k_seq, ad::Var v_seq, MHAParams& params,
                             const AttentionConfig& cfg, const RowMask& key_mask, AttentionTrace* trace) {
  cfg.validate();
  const int d = cfg.dim;
  if (params.query.in_dim() != d || params.query.out_dim() != d || params.key.in_dim() != d ||
      params.value.in_dim() != d || params.output.out_dim() != d || params.output.in_dim() != d) {
    throw std::invalid_argument("multi_head_attention: parameters do not match model dim " + std::to_string(d));
  }
  if (q_seq.cols() != d || k_seq.cols() != d || v_seq.cols() != d) {
    throw std::invalid_argument("multi_head_attention: input widths must equal model dim " + std::to_string(d));
  }
  if (k_seq.rows() != v_seq.rows()) throw std::invalid_argument("multi_head_attention: key/value lengths differ");
  if (!key_mask.empty() && static_cast<Eigen::Index>(key_mask.size()) != k_seq.rows()) {
    throw std::invalid_argument("multi_head_attention: key mask length mismatch");
  }
  ad::Var q = params.query(g, q_seq);
  ad::Var k = params.key(g, k_seq);
  ad::Var v = params.value(g, v_seq);
  const int p = cfg.head_dim();
  std::vector<ad::Var> heads;
  heads.reserve(static_cast<std::size_t>(cfg.heads));
  if (trace != nullptr) trace->head_weights.clear();
  for (int h = 0; h < cfg.heads; ++h) {
    Matrix w;
    heads.push_back(scaled_dot_attention(g, ad::slice_cols(q, h * p, p), ad::slice_cols(k, h * p, p),
                                         ad::slice_cols(v, h * p, p), key_mask, trace ? &w : nullptr));
    if (trace != nullptr) trace->head_weights.push_back(std::move(w));
  }
  ad::Var joined = cfg.heads == 1 ? heads[0] : ad::concat_cols(heads);
  ad::Var out = params.output(g, joined);
  if (trace != nullptr) trace->mha_output = out.value();
  return out;
}

Matrix multi_head_attention(const Matrix& q_seq, const Matrix& k_seq, const Matrix& v_seq, MHAParams& params,
                            const AttentionConfig& cfg) {
  ad::Graph g(ad::GradMode::kInference);
  return multi_head_attention(g, g.constant(q_seq), g.constant(k_seq), g.constant(v_seq), params, cfg).value();
}

namespace {

ad::Var post_norm_block(ad::Graph& g, ad::Var x_q, ad::Var x_kv, AttentionBlockParams& p, const AttentionConfig& cfg,
                        const RowMask& kv_mask, AttentionTrace* trace) {
  ad::Var attended = multi_head_attention(g, x_q, x_kv, x_kv, p.attention, cfg, kv_mask, trace);
  ad::Var y = p.norm1(g, ad::add(x_q, attended));
  ad::Var ff = p.ffn2(g, ad::relu(p.ffn1(g, y)));
  return p.norm2(g, ad::add(y, ff));
}

}  // namespace

ad::Var self_attention_block(ad::Graph& g, ad::Var x, AttentionBlockParams& params, const AttentionConfig& cfg,
                             const RowMask& mask, AttentionTrace* trace) {
  return post_norm_block(g, x, x, params, cfg, mask, trace);
}

ad::Var guided_attention_block(ad::Graph& g, ad::Var x_q, ad::Var x_kv, AttentionBlockParams& params,
                               const AttentionConfig& cfg, const RowMask& kv_mask, AttentionTrace* trace) {
  return post_norm_block(g, x_q, x_kv, params, cfg, kv_mask, trace);
}

}  // namespace catvil
