#include "catvil/visual_pipeline.hpp"

#include <stdexcept>

namespace catvil {
namespace {

constexpr int kConv1Channels = 16;
constexpr int kConv2Channels = 32;

void check_divisible(int height, int width, int patch_size) {
  if (patch_size < 1 || height % patch_size != 0 || width % patch_size != 0) {
    throw std::invalid_argument("image " + std::to_string(height) + "x" + std::to_string(width) +
                                " is not divisible into " + std::to_string(patch_size) + "-pixel patches");
  }
}

}  // namespace

std::string_view to_string(EncoderKind kind) { return kind == EncoderKind::kPatch ? "patch" : "conv"; }

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "patch") return EncoderKind::kPatch;
  if (name == "conv") return EncoderKind::kConv;
  throw std::invalid_argument("unknown encoder kind '" + std::string(name) + "'");
}

Matrix patchify(const Image& image, int p) {
  check_divisible(image.height, image.width, p);
  const int gw = image.width / p;
  const int rows = (image.height / p) * gw;
  const int c = image.channels;
  Matrix out(rows, p * p * c);
  for (int k = 0; k < rows; ++k) {
    const int y0 = (k / gw) * p, x0 = (k % gw) * p;
    int col = 0;
    for (int y = 0; y < p; ++y)
      for (int x = 0; x < p; ++x)
        for (int ch = 0; ch < c; ++ch) out(k, col++) = image.at(y0 + y, x0 + x, ch);
  }
  return out;
}

Image unpatchify(const Matrix& patches, int height, int width, int channels, int p) {
  check_divisible(height, width, p);
  const int gw = width / p;
  if (patches.rows() != (height / p) * gw || patches.cols() != p * p * channels) {
    throw std::invalid_argument("unpatchify: patch matrix shape does not match image geometry");
  }
  Image img(height, width, channels);
  for (int k = 0; k < patches.rows(); ++k) {
    const int y0 = (k / gw) * p, x0 = (k % gw) * p;
    int col = 0;
    for (int y = 0; y < p; ++y)
      for (int x = 0; x < p; ++x)
        for (int ch = 0; ch < channels; ++ch) img.at(y0 + y, x0 + x, ch) = static_cast<float>(patches(k, col++));
  }
  return img;
}

VisualEmbeddingParams::VisualEmbeddingParams(EncoderKind k, int image_height, int image_width, int p, int dim)
    : kind(k), patch_size(p), height(image_height), width(image_width) {
  check_divisible(image_height, image_width, p);
  if (kind == EncoderKind::kPatch) {
    projection = Linear(p * p * 3, dim);
  } else {
    if (p % 2 != 0) throw std::invalid_argument("conv encoder needs an even patch size");
    conv1 = Linear(9 * 3, kConv1Channels);
    conv2 = Linear(9 * kConv1Channels, kConv2Channels);
    projection = Linear(kConv2Channels, dim);
  }
  segment = Param(2, dim);
  position = Param(num_patches(), dim);
}

void VisualEmbeddingParams::init(Rng& rng, double table_stddev) {
  projection.init(rng);
  if (kind == EncoderKind::kConv) {
    conv1.init(rng);
    conv2.init(rng);
  }
  init_normal(segment, table_stddev, rng);
  init_normal(position, table_stddev, rng);
}

void VisualEmbeddingParams::collect(ParamList& out, const std::string& prefix) {
  projection.collect(out, prefix + ".projection");
  if (kind == EncoderKind::kConv) {
    conv1.collect(out, prefix + ".conv1");
    conv2.collect(out, prefix + ".conv2");
  }
  out.push_back({prefix + ".segment", &segment});
  out.push_back({prefix + ".position", &position});
}

ad::Var visual_features(ad::Graph& g, const Image& image, VisualEmbeddingParams& params) {
  if (image.height != params.height || image.width != params.width || image.channels != 3) {
    throw std::invalid_argument("visual encoder expects " + std::to_string(params.height) + "x" +
                                std::to_string(params.width) + "x3 images");
  }
  if (params.kind == EncoderKind::kPatch) {
    return params.projection(g, g.constant((patchify(image, params.patch_size).array() - kPixelMean) / kPixelStd));
  }
  Matrix pixels(static_cast<Eigen::Index>(image.height) * image.width, 3);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) pixels(y * image.width + x, c) = (image.at(y, x, c) - kPixelMean) / kPixelStd;
  ad::Var h = ad::relu(params.conv1(g, ad::im2col(g.constant(std::move(pixels)), image.height, image.width, 3)));
  h = ad::avg_pool(h, image.height, image.width, 2);
  const int h2 = image.height / 2, w2 = image.width / 2;
  h = ad::relu(params.conv2(g, ad::im2col(h, h2, w2, 3)));
  h = ad::avg_pool(h, h2, w2, params.patch_size / 2);
  return params.projection(g, h);
}

ad::Var embed_visual(ad::Graph& g, const Image& image, VisualEmbeddingParams& params) {
  ad::Var f = visual_features(g, image, params);
  ad::Var seg = ad::slice_rows(g.param(params.segment), kVisualSegment, 1);
  return ad::add_row(ad::add(f, g.param(params.position)), seg);
}

EmbeddingSequence embed_visual(const Image& image, VisualEmbeddingParams& params) {
  ad::Graph g(ad::GradMode::kInference);
  return {embed_visual(g, image, params).value(), Modality::kVisual};
}

}  // namespace catvil
