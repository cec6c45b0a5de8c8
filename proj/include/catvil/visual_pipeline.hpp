#pragma once

#include <string>
#include <string_view>

#include "catvil/autodiff.hpp"
#include "catvil/params.hpp"
#include "catvil/synth_data.hpp"
#include "catvil/text_pipeline.hpp"

namespace catvil {

enum class EncoderKind {
  kPatch,  // linear projection of flattened P x P patches
  kConv,   // two 3x3 conv + ReLU + average-pool stages, then a linear projection
};

std::string_view to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

/// Splits an H x W x C image into (H/P)(W/P) rows of P*P*C values, patches in
/// row-major grid order, each patch flattened in (y, x, c) order.
Matrix patchify(const Image& image, int patch_size);
/// Inverse of patchify.
Image unpatchify(const Matrix& patches, int height, int width, int channels, int patch_size);

// Both encoders see standardized samples (x - kPixelMean) / kPixelStd.
inline constexpr double kPixelMean = 0.5;
inline constexpr double kPixelStd = 0.25;

struct VisualEmbeddingParams {
  EncoderKind kind = EncoderKind::kPatch;
  int patch_size = 8;
  int height = kDefaultImageSize;
  int width = kDefaultImageSize;
  Linear projection;  // patch: P*P*3 -> d, conv: conv channels -> d
  Linear conv1;       // 27 -> c1 (conv encoder only)
  Linear conv2;       // 9*c1 -> c2 (conv encoder only)
  Param segment;      // 2 x d, row 1 is the visual segment
  Param position;     // L_v x d

  VisualEmbeddingParams() = default;
  VisualEmbeddingParams(EncoderKind kind, int image_height, int image_width, int patch_size, int dim);

  int num_patches() const { return (height / patch_size) * (width / patch_size); }
  int dim() const { return projection.out_dim(); }
  void init(Rng& rng, double table_stddev = 0.02);
  void collect(ParamList& out, const std::string& prefix);
};

/// Encoder output before segment and position embeddings are added (L_v x d).
ad::Var visual_features(ad::Graph& g, const Image& image, VisualEmbeddingParams& params);
/// Row k = features_k + segment[1] + position[k].
ad::Var embed_visual(ad::Graph& g, const Image& image, VisualEmbeddingParams& params);
EmbeddingSequence embed_visual(const Image& image, VisualEmbeddingParams& params);

}  // namespace catvil
