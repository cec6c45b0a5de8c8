#pragma once

// Vision-language fusion: co-attention stacks (text-guides-vision, vision-guides-text,
// bidirectional), the gated fusion unit, and the registry of fusion strategies
// compared in the ablation harness.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "catvil/attention.hpp"

namespace catvil {

enum class CoAttentionDirection { kT2V, kV2T, kBi };

enum class StackKind {
  kNone,
  kSelf,         // each modality through its own self-attention blocks
  kGuided,       // visual guided-attention layers over the raw text
  kCoAttention,  // self-attention plus guided attention, wired by direction
};

enum class FusionStrategy {
  kConcat,
  kGated,
  kSelfAttn,
  kGuidedAttn,
  kCoAttnBi,
  kCoAttnV2T,
  kCoAttnT2V,
  kSelfAttnGated,
  kGuidedAttnGated,
  kCatvilBi,
  kCatvilV2T,
  kCatvilT2V,
};

struct StrategyTraits {
  StackKind stack = StackKind::kNone;
  CoAttentionDirection direction = CoAttentionDirection::kT2V;
  bool gated = false;
};

std::span<const FusionStrategy> all_fusion_strategies();
StrategyTraits traits(FusionStrategy s);
std::string_view to_string(FusionStrategy s);
/// Display label in the style of the ablation table rows.
std::string_view display_name(FusionStrategy s);
FusionStrategy parse_fusion_strategy(std::string_view name);
std::string_view to_string(CoAttentionDirection d);

// ---- gated fusion ---------------------------------------------------------

enum class GateMode {
  kPerFeature,  // w_i in (0,1)^d
  kScalar,      // one gate value per position
};

std::string_view to_string(GateMode m);
GateMode parse_gate_mode(std::string_view name);

struct GatedFusionParams {
  GateMode mode = GateMode::kPerFeature;
  Param visual;  // theta_v: d x d
  Param text;    // theta_t: d x d
  Param gate;    // theta_w: 2d x d (per-feature) or 2d x 1 (scalar)

  GatedFusionParams() = default;
  GatedFusionParams(int dim, GateMode mode = GateMode::kPerFeature);
  int dim() const { return static_cast<int>(visual.value.rows()); }
  void init(Rng& rng);
  void collect(ParamList& out, const std::string& prefix);
};

/// Per position: w = sigmoid([E_v | E_t] theta_w); E_o = w * tanh(E_v theta_v) + (1 - w) * tanh(E_t theta_t).
/// forced_gate replaces the sigmoid output with a constant.
ad::Var gated_fuse(ad::Graph& g, ad::Var visual, ad::Var text, GatedFusionParams& params,
                   std::optional<double> forced_gate = std::nullopt);
Matrix gated_fuse(const Matrix& visual, const Matrix& text, GatedFusionParams& params,
                  std::optional<double> forced_gate = std::nullopt);

/// Zero-pads the shorter sequence at the tail to max(L_v, L_t) rows.
std::pair<ad::Var, ad::Var> align_sequences(ad::Var visual, ad::Var text);
std::pair<Matrix, Matrix> align_sequences(const Matrix& visual, const Matrix& text);

// ---- attention stacks -----------------------------------------------------

struct CoAttentionStack {
  StackKind kind = StackKind::kCoAttention;
  CoAttentionDirection direction = CoAttentionDirection::kT2V;
  int depth = 0;
  AttentionConfig config;
  std::vector<AttentionBlockParams> visual_self;
  std::vector<AttentionBlockParams> text_self;
  std::vector<AttentionBlockParams> visual_guided;
  std::vector<AttentionBlockParams> text_guided;

  CoAttentionStack() = default;
  CoAttentionStack(StackKind kind, CoAttentionDirection direction, int depth, const AttentionConfig& cfg);
  void init(Rng& rng);
  void collect(ParamList& out, const std::string& prefix);
};

/// Records the attention sublayer of every guided layer, in execution order.
struct StackTrace {
  std::vector<AttentionTrace> guided;
};

struct SequencePair {
  ad::Var visual;
  ad::Var text;
};

/// T2V: text runs through `depth` self-attention blocks to E_t'; each visual layer is a
/// self-attention block followed by guided attention with keys/values from E_t'.
/// V2T swaps the roles. Bi interleaves both branches, each layer's guided attention
/// reading the other modality's self-attended output of that layer.
SequencePair co_attention_stack(ad::Graph& g, ad::Var visual, ad::Var text, CoAttentionStack& stack,
                                const RowMask& visual_mask = {}, const RowMask& text_mask = {},
                                StackTrace* trace = nullptr);

// ---- strategy dispatch ----------------------------------------------------

struct FusionParams {
  FusionStrategy strategy = FusionStrategy::kCatvilT2V;
  CoAttentionStack stack;
  GatedFusionParams gate;

  FusionParams() = default;
  FusionParams(FusionStrategy strategy, int depth, const AttentionConfig& cfg, GateMode gate_mode = GateMode::kPerFeature);
  void init(Rng& rng);
  void collect(ParamList& out, const std::string& prefix);
};

struct FusedSequence {
  ad::Var rows;
  RowMask mask;  // empty = all rows valid
};

FusedSequence fuse(ad::Graph& g, ad::Var visual, ad::Var text, FusionParams& params, const RowMask& visual_mask = {},
                   const RowMask& text_mask = {}, StackTrace* trace = nullptr);

}  // namespace catvil
