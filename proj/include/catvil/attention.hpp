#pragma once

// Scaled dot-product and multi-head attention, plus the post-norm
// self-attention and guided-attention blocks used by the co-attention stacks.

#include <string>
#include <vector>

#include "catvil/autodiff.hpp"
#include "catvil/params.hpp"

namespace catvil {

struct AttentionConfig {
  int dim = 64;
  int heads = 4;
  int ffn_hidden = 256;

  int head_dim() const { return dim / heads; }
  /// Throws std::invalid_argument unless dim, heads, ffn_hidden >= 1 and heads divides dim.
  void validate() const;
};

/// Q/K/V projections (head i owns columns [i*p, (i+1)*p) of each) and the output map W_o.
struct MHAParams {
  Linear query;
  Linear key;
  Linear value;
  Linear output;

  MHAParams() = default;
  explicit MHAParams(const AttentionConfig& cfg);
  void init(Rng& rng);
  void collect(ParamList& out, const std::string& prefix);
};

/// x -> LN(x + MHA) -> LN(y + FFN(y)) with a ReLU feed-forward layer.
struct AttentionBlockParams {
  MHAParams attention;
  LayerNormParams norm1;
  Linear ffn1;
  Linear ffn2;
  LayerNormParams norm2;

  AttentionBlockParams() = default;
  explicit AttentionBlockParams(const AttentionConfig& cfg);
  void init(Rng& rng);
  void collect(ParamList& out, const std::string& prefix);
};

/// Optional instrumentation filled in by the attention functions.
struct AttentionTrace {
  std::vector<Matrix> head_weights;  // one L_q x L_k matrix per head
  Matrix mha_output;                 // attention sublayer output before the residual
};

Matrix softmax_rows(const Matrix& m);
Matrix scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v);

/// softmax(Q K^T / sqrt(p_k)) V. Masked keys get zero weight.
ad::Var scaled_dot_attention(ad::Graph& g, ad::Var q, ad::Var k, ad::Var v, const RowMask& key_mask = {},
                             Matrix* weights = nullptr);

ad::Var multi_head_attention(ad::Graph& g, ad::Var q_seq, ad::Var k_seq, ad::Var v_seq, MHAParams& params,
                             const AttentionConfig& cfg, const RowMask& key_mask = {},
                             AttentionTrace* trace = nullptr);
Matrix multi_head_attention(const Matrix& q_seq, const Matrix& k_seq, const Matrix& v_seq, MHAParams& params,
                            const AttentionConfig& cfg);

ad::Var self_attention_block(ad::Graph& g, ad::Var x, AttentionBlockParams& params, const AttentionConfig& cfg,
                             const RowMask& mask = {}, AttentionTrace* trace = nullptr);
/// Queries from x_q, keys and values from x_kv.
ad::Var guided_attention_block(ad::Graph& g, ad::Var x_q, ad::Var x_kv, AttentionBlockParams& params,
                               const AttentionConfig& cfg, const RowMask& kv_mask = {},
                               AttentionTrace* trace = nullptr);

}  // namespace catvil
