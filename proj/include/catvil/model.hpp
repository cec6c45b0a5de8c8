#pragma once

// The full VQLA network: text and visual embeddings, a fusion strategy, the
// transformer encoder and the two prediction heads, plus binary checkpoints.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "catvil/encoder_heads.hpp"
#include "catvil/fusion.hpp"
#include "catvil/text_pipeline.hpp"
#include "catvil/visual_pipeline.hpp"

namespace catvil {

struct ModelConfig {
  int dim = 64;
  int heads = 4;
  int ffn_hidden = 256;
  int coattn_depth = 2;
  int encoder_depth = 2;
  int image_size = kDefaultImageSize;
  int patch_size = 8;
  int text_length = 16;
  int num_classes = kNumClasses;
  EncoderKind encoder = EncoderKind::kPatch;
  FusionStrategy strategy = FusionStrategy::kCatvilT2V;
  GateMode gate_mode = GateMode::kPerFeature;

  AttentionConfig attention() const { return {dim, heads, ffn_hidden}; }
  /// Throws std::invalid_argument on inconsistent sizes.
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

struct ForwardOutput {
  ad::Var logits;  // 1 x num_classes
  ad::Var box;     // 1 x 4, center form
};

struct Prediction {
  int label = 0;
  Eigen::RowVectorXd probs;
  PredictedBox box;
};

/// Parameters hold their own storage and graphs refer to them by address, so a
/// model must stay put while a graph built from it is alive.
class VqlaModel {
 public:
  VqlaModel(const ModelConfig& config, Vocabulary vocab);

  /// Fan-in uniform for linear maps, zero biases, N(0, 0.02) for tables and the CLS token.
  void init(std::uint64_t seed);

  ForwardOutput forward(ad::Graph& g, const Image& image, std::string_view question);
  Prediction predict(const Image& image, std::string_view question);

  ParamList parameters();
  std::size_t parameter_count() { return count_parameters(parameters()); }

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  std::uint64_t seed() const { return seed_; }

  /// Binary container: magic, JSON header (config, vocabulary, seed), then every
  /// named parameter as rows, cols and raw little-endian doubles.
  void save(const std::filesystem::path& path);
  static VqlaModel load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  Vocabulary vocab_;
  std::uint64_t seed_ = 0;
  TextEmbeddingTables text_;
  VisualEmbeddingParams visual_;
  FusionParams fusion_;
  EncoderParams encoder_;
  ClassifierHead classifier_;
  BoxHead box_head_;
};

}  // namespace catvil
