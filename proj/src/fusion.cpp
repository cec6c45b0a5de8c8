#include "catvil/fusion.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace catvil {
namespace {

struct StrategyEntry {
  FusionStrategy strategy;
  std::string_view name;
  std::string_view label;
  StrategyTraits traits;
};

using D = CoAttentionDirection;
using K = StackKind;

constexpr std::array<StrategyEntry, 12> kStrategies{{
    {FusionStrategy::kConcat, "concat", "Concatenation", {K::kNone, D::kT2V, false}},
    {FusionStrategy::kGated, "gated", "Gated Fusion", {K::kNone, D::kT2V, true}},
    {FusionStrategy::kSelfAttn, "self_attn", "Self-Attn", {K::kSelf, D::kT2V, false}},
    {FusionStrategy::kGuidedAttn, "guided_attn", "Guided-Attn", {K::kGuided, D::kT2V, false}},
    {FusionStrategy::kCoAttnBi, "coattn_bi", "Co-Attn (Bi)", {K::kCoAttention, D::kBi, false}},
    {FusionStrategy::kCoAttnV2T, "coattn_v2t", "Co-Attn (V2T)", {K::kCoAttention, D::kV2T, false}},
    {FusionStrategy::kCoAttnT2V, "coattn_t2v", "Co-Attn (T2V)", {K::kCoAttention, D::kT2V, false}},
    {FusionStrategy::kSelfAttnGated, "self_attn_gated", "Self-Attn Gated", {K::kSelf, D::kT2V, true}},
    {FusionStrategy::kGuidedAttnGated, "guided_attn_gated", "Guided-Attn Gated", {K::kGuided, D::kT2V, true}},
    {FusionStrategy::kCatvilBi, "catvil_bi", "CAT-ViL (Bi)", {K::kCoAttention, D::kBi, true}},
    {FusionStrategy::kCatvilV2T, "catvil_v2t", "CAT-ViL (V2T)", {K::kCoAttention, D::kV2T, true}},
    {FusionStrategy::kCatvilT2V, "catvil_t2v", "CAT-ViL (T2V)", {K::kCoAttention, D::kT2V, true}},
}};

constexpr std::array<FusionStrategy, 12> kStrategyOrder{
    FusionStrategy::kConcat,      FusionStrategy::kGated,         FusionStrategy::kSelfAttn,
    FusionStrategy::kGuidedAttn,  FusionStrategy::kCoAttnBi,      FusionStrategy::kCoAttnV2T,
    FusionStrategy::kCoAttnT2V,   FusionStrategy::kSelfAttnGated, FusionStrategy::kGuidedAttnGated,
    FusionStrategy::kCatvilBi,    FusionStrategy::kCatvilV2T,     FusionStrategy::kCatvilT2V,
};

const StrategyEntry& entry(FusionStrategy s) {
  for (const auto& e : kStrategies)
    if (e.strategy == s) return e;
  throw std::invalid_argument("unknown fusion strategy");
}

std::vector<AttentionBlockParams> make_blocks(int n, const AttentionConfig& cfg) {
  std::vector<AttentionBlockParams> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.emplace_back(cfg);
  return out;
}

void collect_blocks(std::vector<AttentionBlockParams>& blocks, ParamList& out, const std::string& prefix) {
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(out, prefix + "." + std::to_string(i));
}

ad::Var run_self(ad::Graph& g, ad::Var x, std::vector<AttentionBlockParams>& blocks, const AttentionConfig& cfg,
                 const RowMask& mask) {
  for (auto& b : blocks) x = self_attention_block(g, x, b, cfg, mask);
  return x;
}

AttentionTrace* next_slot(StackTrace* trace) {
  if (trace == nullptr) return nullptr;
  trace->guided.emplace_back();
  return &trace->guided.back();
}

RowMask full_mask(const RowMask& m, Eigen::Index rows) {
  return m.empty() ? RowMask(static_cast<std::size_t>(rows), 1) : m;
}

}  // namespace

std::span<const FusionStrategy> all_fusion_strategies() { return kStrategyOrder; }
StrategyTraits traits(FusionStrategy s) { return entry(s).traits; }
std::string_view to_string(FusionStrategy s) { return entry(s).name; }
std::string_view display_name(FusionStrategy s) { return entry(s).label; }

FusionStrategy parse_fusion_strategy(std::string_view name) {
  for (const auto& e : kStrategies)
    if (e.name == name) return e.strategy;
  throw std::invalid_argument("unknown fusion strategy '" + std::string(name) + "'");
}

std::string_view to_string(CoAttentionDirection d) {
  switch (d) {
    case D::kT2V: return "t2v";
    case D::kV2T: return "v2t";
    case D::kBi: return "bi";
  }
  return "?";
}

std::string_view to_string(GateMode m) { return m == GateMode::kPerFeature ? "feature" : "scalar"; }

GateMode parse_gate_mode(std::string_view name) {
  if (name == "feature") return GateMode::kPerFeature;
  if (name == "scalar") return GateMode::kScalar;
  throw std::invalid_argument("unknown gate mode '" + std::string(name) + "'");
}

GatedFusionParams::GatedFusionParams(int dim, GateMode m)
    : mode(m), visual(dim, dim), text(dim, dim), gate(2 * dim, m == GateMode::kPerFeature ? dim : 1) {
  if (dim < 1) throw std::invalid_argument("GatedFusionParams: dim must be >= 1");
}

void GatedFusionParams::init(Rng& rng) {
  init_fan_in_uniform(visual, dim(), rng);
  init_fan_in_uniform(text, dim(), rng);
  init_fan_in_uniform(gate, 2 * dim(), rng);
}

void GatedFusionParams::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".theta_v", &visual});
  out.push_back({prefix + ".theta_t", &text});
  out.push_back({prefix + ".theta_w", &gate});
}

ad::Var gated_fuse(ad::Graph& g, ad::Var visual, ad::Var text, GatedFusionParams& params,
                   std::optional<double> forced_gate) {
  if (visual.rows() != text.rows()) {
    throw std::invalid_argument("gated_fuse: sequence lengths differ (" + std::to_string(visual.rows()) + " vs " +
                                std::to_string(text.rows()) + "); align them first");
  }
  if (visual.cols() != params.dim() || text.cols() != params.dim()) {
    throw std::invalid_argument("gated_fuse: input width does not match gate dim " + std::to_string(params.dim()));
  }
  ad::Var hv = ad::tanh(ad::matmul(visual, g.param(params.visual)));
  ad::Var ht = ad::tanh(ad::matmul(text, g.param(params.text)));
  ad::Var w;
  if (forced_gate) {
    const Eigen::Index cols = params.mode == GateMode::kPerFeature ? params.dim() : 1;
    w = g.constant(Matrix::Constant(visual.rows(), cols, *forced_gate));
  } else {
    std::array<ad::Var, 2> both{visual, text};
    w = ad::sigmoid(ad::matmul(ad::concat_cols(both), g.param(params.gate)));
  }
  if (params.mode == GateMode::kPerFeature) return ad::add(ad::mul(w, hv), ad::mul(ad::one_minus(w), ht));
  return ad::add(ad::mul_col(hv, w), ad::mul_col(ht, ad::one_minus(w)));
}

Matrix gated_fuse(const Matrix& visual, const Matrix& text, GatedFusionParams& params,
                  std::optional<double> forced_gate) {
  ad::Graph g(ad::GradMode::kInference);
  return gated_fuse(g, g.constant(visual), g.constant(text), params, forced_gate).value();
}

std::pair<ad::Var, ad::Var> align_sequences(ad::Var visual, ad::Var text) {
  if (visual.cols() != text.cols()) throw std::invalid_argument("align_sequences: widths differ");
  const Eigen::Index len = std::max(visual.rows(), text.rows());
  return {ad::pad_rows(visual, len), ad::pad_rows(text, len)};
}

std::pair<Matrix, Matrix> align_sequences(const Matrix& visual, const Matrix& text) {
  ad::Graph g(ad::GradMode::kInference);
  auto [v, t] = align_sequences(g.constant(visual), g.constant(text));
  return {v.value(), t.value()};
}

CoAttentionStack::CoAttentionStack(StackKind k, CoAttentionDirection dir, int n, const AttentionConfig& cfg)
    : kind(k), direction(dir), depth(n), config(cfg) {
  if (n < 0) throw std::invalid_argument("CoAttentionStack: depth must be >= 0");
  cfg.validate();
  switch (kind) {
    case StackKind::kNone: break;
    case StackKind::kSelf:
      visual_self = make_blocks(n, cfg);
      text_self = make_blocks(n, cfg);
      break;
    case StackKind::kGuided: visual_guided = make_blocks(n, cfg); break;
    case StackKind::kCoAttention:
      visual_self = make_blocks(n, cfg);
      text_self = make_blocks(n, cfg);
      if (dir != D::kV2T) visual_guided = make_blocks(n, cfg);
      if (dir != D::kT2V) text_guided = make_blocks(n, cfg);
      break;
  }
}

void CoAttentionStack::init(Rng& rng) {
  for (auto* group : {&visual_self, &text_self, &visual_guided, &text_guided})
    for (auto& b : *group) b.init(rng);
}

void CoAttentionStack::collect(ParamList& out, const std::string& prefix) {
  collect_blocks(visual_self, out, prefix + ".visual_self");
  collect_blocks(text_self, out, prefix + ".text_self");
  collect_blocks(visual_guided, out, prefix + ".visual_guided");
  collect_blocks(text_guided, out, prefix + ".text_guided");
}

SequencePair co_attention_stack(ad::Graph& g, ad::Var visual, ad::Var text, CoAttentionStack& stack,
                                const RowMask& visual_mask, const RowMask& text_mask, StackTrace* trace) {
  const auto& cfg = stack.config;
  if (visual.cols() != text.cols()) throw std::invalid_argument("co_attention_stack: widths differ");
  const auto n = static_cast<std::size_t>(stack.depth);
  ad::Var v = visual;
  ad::Var t = text;
  switch (stack.kind) {
    case StackKind::kNone: break;
    case StackKind::kSelf:
      v = run_self(g, v, stack.visual_self, cfg, visual_mask);
      t = run_self(g, t, stack.text_self, cfg, text_mask);
      break;
    case StackKind::kGuided:
      for (std::size_t i = 0; i < n; ++i)
        v = guided_attention_block(g, v, text, stack.visual_guided[i], cfg, text_mask, next_slot(trace));
      break;
    case StackKind::kCoAttention:
      if (stack.direction == D::kT2V) {
        t = run_self(g, t, stack.text_self, cfg, text_mask);
        for (std::size_t i = 0; i < n; ++i) {
          v = self_attention_block(g, v, stack.visual_self[i], cfg, visual_mask);
          v = guided_attention_block(g, v, t, stack.visual_guided[i], cfg, text_mask, next_slot(trace));
        }
      } else if (stack.direction == D::kV2T) {
        v = run_self(g, v, stack.visual_self, cfg, visual_mask);
        for (std::size_t i = 0; i < n; ++i) {
          t = self_attention_block(g, t, stack.text_self[i], cfg, text_mask);
          t = guided_attention_block(g, t, v, stack.text_guided[i], cfg, visual_mask, next_slot(trace));
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          ad::Var vs = self_attention_block(g, v, stack.visual_self[i], cfg, visual_mask);
          ad::Var ts = self_attention_block(g, t, stack.text_self[i], cfg, text_mask);
          v = guided_attention_block(g, vs, ts, stack.visual_guided[i], cfg, text_mask, next_slot(trace));
          t = guided_attention_block(g, ts, vs, stack.text_guided[i], cfg, visual_mask, next_slot(trace));
        }
      }
      break;
  }
  return {v, t};
}

FusionParams::FusionParams(FusionStrategy s, int depth, const AttentionConfig& cfg, GateMode gate_mode)
    : strategy(s) {
  const StrategyTraits tr = traits(s);
  stack = CoAttentionStack(tr.stack, tr.direction, tr.stack == StackKind::kNone ? 0 : depth, cfg);
  if (tr.gated) gate = GatedFusionParams(cfg.dim, gate_mode);
}

void FusionParams::init(Rng& rng) {
  stack.init(rng);
  if (traits(strategy).gated) gate.init(rng);
}

void FusionParams::collect(ParamList& out, const std::string& prefix) {
  stack.collect(out, prefix + ".stack");
  if (traits(strategy).gated) gate.collect(out, prefix + ".gate");
}

FusedSequence fuse(ad::Graph& g, ad::Var visual, ad::Var text, FusionParams& params, const RowMask& visual_mask,
                   const RowMask& text_mask, StackTrace* trace) {
  const StrategyTraits tr = traits(params.strategy);
  SequencePair attended = co_attention_stack(g, visual, text, params.stack, visual_mask, text_mask, trace);
  const Eigen::Index lv = visual.rows(), lt = text.rows();

  if (!tr.gated) {
    std::array<ad::Var, 2> parts{attended.visual, attended.text};
    FusedSequence out{ad::concat_rows(parts), {}};
    if (!visual_mask.empty() || !text_mask.empty()) {
      out.mask = full_mask(visual_mask, lv);
      RowMask tm = full_mask(text_mask, lt);
      out.mask.insert(out.mask.end(), tm.begin(), tm.end());
    }
    return out;
  }

  auto [v, t] = align_sequences(attended.visual, attended.text);
  FusedSequence out{gated_fuse(g, v, t, params.gate), {}};
  if (!visual_mask.empty() || !text_mask.empty()) {
    const Eigen::Index len = v.rows();
    RowMask vm = full_mask(visual_mask, lv), tm = full_mask(text_mask, lt);
    out.mask.assign(static_cast<std::size_t>(len), 0);
    for (Eigen::Index i = 0; i < len; ++i) {
      const bool vv = i < lv && vm[static_cast<std::size_t>(i)];
      const bool tv = i < lt && tm[static_cast<std::size_t>(i)];
      out.mask[static_cast<std::size_t>(i)] = vv || tv;
    }
  }
  return out;
}

}  // namespace catvil
