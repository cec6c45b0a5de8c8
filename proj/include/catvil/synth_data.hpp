#pragma once

// Synthetic visual question localized-answering data: flat-coloured ellipses
// ("organs") and triangles ("tools") on a textured background, with questions
// about the organ, the tool, or the tool-organ interaction.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace catvil {

inline constexpr int kNumClasses = 18;
inline constexpr int kNumOrganClasses = 6;
inline constexpr int kNumToolClasses = 6;
inline constexpr int kNumInteractionClasses = 6;
inline constexpr int kDefaultImageSize = 64;

/// Normalized corner-form box: 0 <= x1 < x2 <= 1, 0 <= y1 < y2 <= 1.
struct BoundingBox {
  double x1 = 0, y1 = 0, x2 = 1, y2 = 1;

  bool valid() const { return 0.0 <= x1 && x1 < x2 && x2 <= 1.0 && 0.0 <= y1 && y1 < y2 && y2 <= 1.0; }
  double area() const { return (x2 - x1) * (y2 - y1); }
  bool operator==(const BoundingBox&) const = default;
};

/// Smallest box containing both a and b.
BoundingBox box_union(const BoundingBox& a, const BoundingBox& b);

/// H x W x C image with float samples stored row-major in (y, x, c) order.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c = 3, float fill = 0.0f)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::size_t size() const { return data.size(); }
  bool operator==(const Image&) const = default;
};

enum class QuestionKind { kOrgan, kTool, kInteraction };

std::string_view to_string(QuestionKind kind);
/// Throws std::invalid_argument on an unknown name.
QuestionKind parse_question_kind(std::string_view name);

struct OrganSpec {
  int color_id = 0;
  double cx = 0, cy = 0;  // pixels
  double rx = 0, ry = 0;  // semi-axes, pixels
  bool operator==(const OrganSpec&) const = default;
};

struct ToolSpec {
  int color_id = 0;
  double cx = 0, cy = 0;
  double radius = 0;
  /// Pointing direction index; the tip points at angle direction * 60 degrees.
  int direction = 0;
  bool operator==(const ToolSpec&) const = default;

  std::array<std::array<double, 2>, 3> vertices() const;
};

struct SceneSpec {
  int height = kDefaultImageSize;
  int width = kDefaultImageSize;
  std::uint64_t texture_seed = 0;
  OrganSpec organ;
  std::vector<ToolSpec> tools;
  /// Interaction of the first tool with the organ; encoded visually by its direction.
  int interaction_id = 0;
  bool operator==(const SceneSpec&) const = default;
};

struct VQLASample {
  Image image;
  std::string question;
  int answer_id = 0;
  BoundingBox box;
  bool operator==(const VQLASample&) const = default;
};

/// Names of the 18 answers: 6 organs, then 6 tools, then 6 interactions.
const std::array<std::string_view, kNumClasses>& answer_names();

BoundingBox organ_box(const SceneSpec& scene);
BoundingBox tool_box(const SceneSpec& scene, std::size_t tool = 0);

/// Deterministic scene for a seed. `size` is the square image side in pixels.
SceneSpec generate_scene(std::uint64_t seed, int size = kDefaultImageSize);
Image render_image(const SceneSpec& scene);
VQLASample render_sample(const SceneSpec& scene, QuestionKind kind, std::uint64_t seed);

/// Question templates for a kind (three each).
const std::array<std::string_view, 3>& question_templates(QuestionKind kind);

/// Sample `index` of the stream identified by `seed`; a pure function of both.
VQLASample generate_sample(std::uint64_t seed, std::size_t index, int size = kDefaultImageSize);
std::vector<VQLASample> generate_dataset(std::uint64_t seed, std::size_t count, int size = kDefaultImageSize);

// On-disk format: DIR/manifest.jsonl plus DIR/images/NNNNNN.vqla per sample.
void write_image(const std::filesystem::path& path, const Image& image);
Image read_image(const std::filesystem::path& path);
void write_dataset(std::span<const VQLASample> samples, const std::filesystem::path& dir);
std::vector<VQLASample> read_dataset(const std::filesystem::path& dir);

}  // namespace catvil
