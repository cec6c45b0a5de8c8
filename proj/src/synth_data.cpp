#include "catvil/synth_data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "catvil/errors.hpp"
#include "catvil/params.hpp"

namespace catvil {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kMinExtent = 8;

using Rgb = std::array<float, 3>;

constexpr std::array<Rgb, kNumOrganClasses> kOrganColors{{
    {0.55f, 0.16f, 0.10f},  // liver
    {0.95f, 0.62f, 0.52f},  // intestine
    {0.96f, 0.92f, 0.55f},  // fat
    {0.85f, 0.30f, 0.32f},  // kidney
    {0.90f, 0.72f, 0.25f},  // stomach
    {0.58f, 0.20f, 0.55f},  // spleen
}};

constexpr std::array<Rgb, kNumToolClasses> kToolColors{{
    {0.20f, 0.55f, 0.95f},
    {0.30f, 0.88f, 0.40f},
    {0.86f, 0.86f, 0.92f},
    {0.10f, 0.25f, 0.55f},
    {0.48f, 0.48f, 0.48f},
    {0.15f, 0.80f, 0.78f},
}};

constexpr std::array<std::string_view, kNumClasses> kAnswerNames{
    "liver",         "intestine", "fat",          "kidney",   "stomach",  "spleen",
    "forceps",       "scissors",  "needledriver", "clipper",  "suction",  "stapler",
    "grasping",      "retraction", "dissection",  "cautery",  "suturing", "idle",
};

constexpr std::array<std::string_view, 3> kOrganQuestions{
    "what organ is visible in the scene",
    "which organ is being operated on",
    "what is the organ in this image",
};
constexpr std::array<std::string_view, 3> kToolQuestions{
    "what tool is in the image",
    "which surgical instrument is visible",
    "what instrument is being used here",
};
constexpr std::array<std::string_view, 3> kInteractionQuestions{
    "what is the tool doing to the organ",
    "what interaction happens between instrument and tissue",
    "what action is the instrument performing",
};

BoundingBox tool_box_px(const ToolSpec& t, double w, double h) {
  auto v = t.vertices();
  double x1 = std::min({v[0][0], v[1][0], v[2][0]});
  double x2 = std::max({v[0][0], v[1][0], v[2][0]});
  double y1 = std::min({v[0][1], v[1][1], v[2][1]});
  double y2 = std::max({v[0][1], v[1][1], v[2][1]});
  return {x1 / w, y1 / h, x2 / w, y2 / h};
}

double overlap_fraction(const BoundingBox& a, const BoundingBox& b) {
  double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  return iw * ih / std::min(a.area(), b.area());
}

bool inside_triangle(double px, double py, const std::array<std::array<double, 2>, 3>& v) {
  auto edge = [&](int i, int j) {
    return (v[j][0] - v[i][0]) * (py - v[i][1]) - (v[j][1] - v[i][1]) * (px - v[i][0]);
  };
  double e0 = edge(0, 1), e1 = edge(1, 2), e2 = edge(2, 0);
  return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff), static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32(const std::vector<unsigned char>& bytes, std::size_t at) {
  return static_cast<std::uint32_t>(bytes[at]) | (static_cast<std::uint32_t>(bytes[at + 1]) << 8) |
         (static_cast<std::uint32_t>(bytes[at + 2]) << 16) | (static_cast<std::uint32_t>(bytes[at + 3]) << 24);
}

std::string image_name(std::size_t index) {
  std::ostringstream os;
  os << "images/" << std::setw(6) << std::setfill('0') << index << ".vqla";
  return os.str();
}

}  // namespace

BoundingBox box_union(const BoundingBox& a, const BoundingBox& b) {
  return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
}

std::string_view to_string(QuestionKind kind) {
  switch (kind) {
    case QuestionKind::kOrgan: return "organ";
    case QuestionKind::kTool: return "tool";
    case QuestionKind::kInteraction: return "interaction";
  }
  throw std::invalid_argument("unknown question kind");
}

QuestionKind parse_question_kind(std::string_view name) {
  if (name == "organ") return QuestionKind::kOrgan;
  if (name == "tool") return QuestionKind::kTool;
  if (name == "interaction") return QuestionKind::kInteraction;
  throw std::invalid_argument("unknown question kind '" + std::string(name) + "'");
}

const std::array<std::string_view, kNumClasses>& answer_names() { return kAnswerNames; }

const std::array<std::string_view, 3>& question_templates(QuestionKind kind) {
  switch (kind) {
    case QuestionKind::kOrgan: return kOrganQuestions;
    case QuestionKind::kTool: return kToolQuestions;
    case QuestionKind::kInteraction: return kInteractionQuestions;
  }
  throw std::invalid_argument("unknown question kind");
}

std::array<std::array<double, 2>, 3> ToolSpec::vertices() const {
  const double theta = direction * kPi / 3.0;
  const double spread = 2.5;
  const double base = 0.7 * radius;
  return {{
      {cx + radius * std::cos(theta), cy + radius * std::sin(theta)},
      {cx + base * std::cos(theta + spread), cy + base * std::sin(theta + spread)},
      {cx + base * std::cos(theta - spread), cy + base * std::sin(theta - spread)},
  }};
}

BoundingBox organ_box(const SceneSpec& s) {
  const auto& o = s.organ;
  return {(o.cx - o.rx) / s.width, (o.cy - o.ry) / s.height, (o.cx + o.rx) / s.width, (o.cy + o.ry) / s.height};
}

BoundingBox tool_box(const SceneSpec& s, std::size_t tool) {
  if (tool >= s.tools.size()) throw std::out_of_range("tool_box: scene has no tool " + std::to_string(tool));
  return tool_box_px(s.tools[tool], s.width, s.height);
}

SceneSpec generate_scene(std::uint64_t seed, int size) {
  if (size < 4 * kMinExtent) throw std::invalid_argument("generate_scene: image size too small");
  Rng rng(mix_seed(seed, 0x5ce7e));
  SceneSpec s;
  s.height = size;
  s.width = size;
  s.texture_seed = rng.next();

  const double scale = size / 64.0;
  OrganSpec& o = s.organ;
  o.color_id = rng.uniform_int(kNumOrganClasses);
  o.rx = rng.uniform(6.0, 14.0) * scale;
  o.ry = rng.uniform(6.0, 14.0) * scale;
  o.cx = rng.uniform(o.rx + 1.0, size - o.rx - 1.0);
  o.cy = rng.uniform(o.ry + 1.0, size - o.ry - 1.0);

  ToolSpec t;
  t.color_id = rng.uniform_int(kNumToolClasses);
  t.direction = rng.uniform_int(kNumInteractionClasses);
  t.radius = rng.uniform(8.0, 13.0) * scale;
  for (;;) {
    BoundingBox b = tool_box_px(ToolSpec{t.color_id, 0, 0, t.radius, t.direction}, 1.0, 1.0);
    if ((b.x2 - b.x1) >= kMinExtent && (b.y2 - b.y1) >= kMinExtent) break;
    t.radius += 0.5;
  }
  const BoundingBox rel = tool_box_px(ToolSpec{t.color_id, 0, 0, t.radius, t.direction}, 1.0, 1.0);
  const BoundingBox obox = organ_box(s);
  // Keep the tool from hiding most of the organ; fall back to the last draw.
  for (int attempt = 0; attempt < 64; ++attempt) {
    t.cx = rng.uniform(1.0 - rel.x1, size - 1.0 - rel.x2);
    t.cy = rng.uniform(1.0 - rel.y1, size - 1.0 - rel.y2);
    if (overlap_fraction(tool_box_px(t, size, size), obox) < 0.3) break;
  }
  s.tools.push_back(t);
  s.interaction_id = t.direction;
  return s;
}

Image render_image(const SceneSpec& s) {
  Image img(s.height, s.width, 3);
  Rng rng(s.texture_seed);

  // Smooth value noise on a coarse lattice plus fine grain.
  constexpr int kCells = 8;
  std::array<std::array<double, kCells + 1>, kCells + 1> lattice{};
  for (auto& row : lattice)
    for (auto& v : row) v = rng.uniform(-1.0, 1.0);
  const Rgb tissue{0.30f, 0.12f, 0.11f};
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      double gy = (y + 0.5) / s.height * kCells, gx = (x + 0.5) / s.width * kCells;
      int iy = std::min(static_cast<int>(gy), kCells - 1), ix = std::min(static_cast<int>(gx), kCells - 1);
      double fy = gy - iy, fx = gx - ix;
      double n = (1 - fy) * ((1 - fx) * lattice[iy][ix] + fx * lattice[iy][ix + 1]) +
                 fy * ((1 - fx) * lattice[iy + 1][ix] + fx * lattice[iy + 1][ix + 1]);
      double grain = rng.uniform(-1.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        double v = tissue[c] + 0.07 * n + 0.025 * grain;
        img.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }

  const auto& o = s.organ;
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      double dx = (x + 0.5 - o.cx) / o.rx, dy = (y + 0.5 - o.cy) / o.ry;
      if (dx * dx + dy * dy <= 1.0) {
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = kOrganColors[o.color_id][c];
      }
    }
  }
  for (const ToolSpec& t : s.tools) {
    auto v = t.vertices();
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        if (inside_triangle(x + 0.5, y + 0.5, v)) {
          for (int c = 0; c < 3; ++c) img.at(y, x, c) = kToolColors[t.color_id][c];
        }
      }
    }
  }
  return img;
}

VQLASample render_sample(const SceneSpec& scene, QuestionKind kind, std::uint64_t seed) {
  if (scene.tools.empty()) throw std::invalid_argument("render_sample: scene has no tool");
  const auto& templates = question_templates(kind);  // throws on an invalid kind
  Rng rng(mix_seed(seed, 0x9a));
  VQLASample out;
  out.image = render_image(scene);
  out.question = std::string(templates[static_cast<std::size_t>(rng.uniform_int(3))]);
  switch (kind) {
    case QuestionKind::kOrgan:
      out.answer_id = scene.organ.color_id;
      out.box = organ_box(scene);
      break;
    case QuestionKind::kTool:
      out.answer_id = kNumOrganClasses + scene.tools[0].color_id;
      out.box = tool_box(scene, 0);
      break;
    case QuestionKind::kInteraction:
      out.answer_id = kNumOrganClasses + kNumToolClasses + scene.interaction_id;
      out.box = box_union(tool_box(scene, 0), organ_box(scene));
      break;
  }
  return out;
}

VQLASample generate_sample(std::uint64_t seed, std::size_t index, int size) {
  const std::uint64_t s = mix_seed(seed, index);
  SceneSpec scene = generate_scene(s, size);
  Rng rng(mix_seed(s, 1));
  auto kind = static_cast<QuestionKind>(rng.uniform_int(3));
  return render_sample(scene, kind, mix_seed(s, 2));
}

std::vector<VQLASample> generate_dataset(std::uint64_t seed, std::size_t count, int size) {
  std::vector<VQLASample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_sample(seed, i, size));
  return out;
}

void write_image(const std::filesystem::path& path, const Image& image) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_image: cannot open " + path.string());
  os.write("VQLA", 4);
  put_u32(os, static_cast<std::uint32_t>(image.height));
  put_u32(os, static_cast<std::uint32_t>(image.width));
  put_u32(os, static_cast<std::uint32_t>(image.channels));
  for (float f : image.data) put_u32(os, std::bit_cast<std::uint32_t>(f));
  if (!os) throw std::runtime_error("write_image: write failed for " + path.string());
}

Image read_image(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_image: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4) throw FormatError(path.string() + ": truncated magic", bytes.size());
  if (bytes[0] != 'V' || bytes[1] != 'Q' || bytes[2] != 'L' || bytes[3] != 'A') {
    throw FormatError(path.string() + ": bad magic, expected VQLA", 0);
  }
  if (bytes.size() < 16) throw FormatError(path.string() + ": truncated header", bytes.size());
  const std::uint32_t h = get_u32(bytes, 4), w = get_u32(bytes, 8), c = get_u32(bytes, 12);
  if (h == 0 || w == 0 || c == 0 || h > 65536 || w > 65536 || c > 64) {
    throw FormatError(path.string() + ": implausible image dimensions", 4);
  }
  const std::size_t count = static_cast<std::size_t>(h) * w * c;
  const std::size_t expected = 16 + 4 * count;
  if (bytes.size() < expected) throw FormatError(path.string() + ": truncated pixel data", bytes.size());
  if (bytes.size() > expected) throw FormatError(path.string() + ": trailing bytes after pixel data", expected);
  Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  for (std::size_t i = 0; i < count; ++i) img.data[i] = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
  return img;
}

void write_dataset(std::span<const VQLASample> samples, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  std::ofstream manifest(dir / "manifest.jsonl", std::ios::binary);
  if (!manifest) throw std::runtime_error("write_dataset: cannot create manifest in " + dir.string());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const VQLASample& s = samples[i];
    const std::string name = image_name(i);
    write_image(dir / name, s.image);
    nlohmann::json rec;
    rec["question"] = s.question;
    rec["answer_id"] = s.answer_id;
    rec["answer"] = std::string(kAnswerNames.at(static_cast<std::size_t>(s.answer_id)));
    rec["box"] = {s.box.x1, s.box.y1, s.box.x2, s.box.y2};
    rec["image"] = name;
    manifest << rec.dump() << '\n';
  }
  if (!manifest) throw std::runtime_error("write_dataset: write failed for " + dir.string());
}

std::vector<VQLASample> read_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.jsonl";
  std::ifstream is(manifest_path, std::ios::binary);
  if (!is) throw std::runtime_error("read_dataset: cannot open " + manifest_path.string());
  std::vector<VQLASample> out;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(is, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(manifest_path.string() + ": malformed record: " + e.what(), line_start + e.byte);
    }
    VQLASample s;
    try {
      s.question = rec.at("question").get<std::string>();
      s.answer_id = rec.at("answer_id").get<int>();
      const auto& b = rec.at("box");
      if (!b.is_array() || b.size() != 4) throw FormatError(manifest_path.string() + ": box needs 4 values", line_start);
      s.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      s.image = read_image(dir / rec.at("image").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(manifest_path.string() + ": bad record field: " + e.what(), line_start);
    }
    if (s.answer_id < 0 || s.answer_id >= kNumClasses) {
      throw FormatError(manifest_path.string() + ": answer_id out of range", line_start);
    }
    if (!s.box.valid()) throw FormatError(manifest_path.string() + ": box violates corner ordering", line_start);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace catvil
