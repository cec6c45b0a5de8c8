#include "catvil/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "catvil/params.hpp"

namespace catvil {
namespace {

constexpr double kPi = 3.14159265358979323846;

using F = CorruptionFamily;

constexpr std::array<CorruptionInfo, kNumCorruptions> kRegistry{{
    {"gaussian_noise", F::kNoise, "sigma", {0.08, 0.12, 0.18, 0.26, 0.38}, +1},
    {"shot_noise", F::kNoise, "photons", {60, 25, 12, 5, 3}, -1},
    {"impulse_noise", F::kNoise, "amount", {0.03, 0.06, 0.09, 0.17, 0.27}, +1},
    {"speckle_noise", F::kNoise, "sigma", {0.15, 0.20, 0.35, 0.45, 0.60}, +1},
    {"gaussian_blur", F::kBlur, "sigma_px", {0.5, 0.75, 1.0, 1.5, 2.0}, +1},
    {"defocus_blur", F::kBlur, "disk_radius_px", {1.0, 1.5, 2.0, 2.5, 3.0}, +1},
    {"motion_blur", F::kBlur, "length_px", {3, 5, 7, 9, 11}, +1},
    {"zoom_blur", F::kBlur, "max_zoom", {1.06, 1.11, 1.16, 1.21, 1.26}, +1},
    {"brightness", F::kPhotometric, "offset", {0.1, 0.2, 0.3, 0.4, 0.5}, +1},
    {"contrast", F::kPhotometric, "scale", {0.4, 0.3, 0.2, 0.1, 0.05}, -1},
    {"saturate", F::kPhotometric, "chroma_scale", {0.7, 0.5, 0.3, 0.15, 0.0}, -1},
    {"gamma", F::kPhotometric, "exponent", {1.3, 1.6, 2.0, 2.5, 3.0}, +1},
    {"fog", F::kPhotometric, "strength", {0.15, 0.25, 0.35, 0.45, 0.55}, +1},
    {"elastic_transform", F::kGeometric, "displacement_px", {1, 2, 3, 4, 5}, +1},
    {"pixelate", F::kDigital, "block_px", {2, 3, 4, 5, 6}, +1},
    {"quantize", F::kDigital, "levels", {24, 16, 10, 6, 4}, -1},
    {"block_shuffle", F::kDigital, "fraction", {0.1, 0.2, 0.3, 0.45, 0.6}, +1},
    {"occlusion", F::kOcclusion, "area_fraction", {0.02, 0.05, 0.10, 0.15, 0.20}, +1},
}};

std::string_view family_name(CorruptionFamily f) {
  switch (f) {
    case F::kNoise: return "noise";
    case F::kBlur: return "blur";
    case F::kPhotometric: return "photometric";
    case F::kGeometric: return "geometric";
    case F::kDigital: return "digital";
    case F::kOcclusion: return "occlusion";
  }
  return "?";
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

double pixel(const Image& img, int y, int x, int c) {
  y = std::clamp(y, 0, img.height - 1);
  x = std::clamp(x, 0, img.width - 1);
  return img.at(y, x, c);
}

/// Bilinear sample at continuous pixel coordinates (pixel centers at integers), edge-replicated.
double sample(const Image& img, double y, double x, int c) {
  const double fy = std::floor(y), fx = std::floor(x);
  const int iy = static_cast<int>(fy), ix = static_cast<int>(fx);
  const double ty = y - fy, tx = x - fx;
  return (1 - ty) * ((1 - tx) * pixel(img, iy, ix, c) + tx * pixel(img, iy, ix + 1, c)) +
         ty * ((1 - tx) * pixel(img, iy + 1, ix, c) + tx * pixel(img, iy + 1, ix + 1, c));
}

template <typename Fn>
Image per_value(const Image& in, Fn fn) {
  Image out = in;
  for (auto& v : out.data) v = clamp01(fn(static_cast<double>(v)));
  return out;
}

Image convolve(const Image& in, const std::vector<std::array<double, 3>>& taps) {
  // taps: (dy, dx, weight)
  Image out(in.height, in.width, in.channels);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      for (int c = 0; c < in.channels; ++c) {
        double acc = 0;
        for (const auto& t : taps)
          acc += t[2] * pixel(in, y + static_cast<int>(t[0]), x + static_cast<int>(t[1]), c);
        out.at(y, x, c) = clamp01(acc);
      }
  return out;
}

std::vector<double> gaussian_kernel_1d(double sigma) {
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  for (int i = -r; i <= r; ++i) k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
  const double s = std::accumulate(k.begin(), k.end(), 0.0);
  for (auto& v : k) v /= s;
  return k;
}

Image gaussian_blur(const Image& in, double sigma) {
  auto k = gaussian_kernel_1d(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<std::array<double, 3>> h, v;
  for (int i = -r; i <= r; ++i) {
    h.push_back({0.0, static_cast<double>(i), k[static_cast<std::size_t>(i + r)]});
    v.push_back({static_cast<double>(i), 0.0, k[static_cast<std::size_t>(i + r)]});
  }
  return convolve(convolve(in, h), v);
}

std::vector<double> smooth_field(int h, int w, double sigma, Rng& rng) {
  Image noise(h, w, 1);
  for (auto& v : noise.data) v = static_cast<float>(rng.uniform());
  // Blur in an unclamped buffer: shift to [0,1] range is preserved by averaging.
  Image blurred = gaussian_blur(noise, sigma);
  std::vector<double> out(blurred.data.begin(), blurred.data.end());
  double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
  double peak = 0;
  for (auto& v : out) {
    v -= mean;
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 0)
    for (auto& v : out) v /= peak;
  return out;
}

std::vector<double> plasma(int size, Rng& rng) {
  // Diamond-square on a (2^k + 1) lattice covering `size`.
  int n = 1;
  while (n < size) n *= 2;
  const int dim = n + 1;
  std::vector<double> m(static_cast<std::size_t>(dim) * dim, 0.0);
  auto at = [&](int y, int x) -> double& { return m[static_cast<std::size_t>(y) * dim + x]; };
  double wobble = 1.0;
  for (int step = n; step >= 2; step /= 2, wobble *= 0.55) {
    const int half = step / 2;
    for (int y = half; y < dim; y += step)
      for (int x = half; x < dim; x += step)
        at(y, x) = 0.25 * (at(y - half, x - half) + at(y - half, x + half) + at(y + half, x - half) +
                           at(y + half, x + half)) +
                   wobble * rng.uniform(-1.0, 1.0);
    for (int y = 0; y < dim; y += half)
      for (int x = (y / half) % 2 == 0 ? half : 0; x < dim; x += step) {
        double s = 0;
        int cnt = 0;
        if (y >= half) s += at(y - half, x), ++cnt;
        if (y + half < dim) s += at(y + half, x), ++cnt;
        if (x >= half) s += at(y, x - half), ++cnt;
        if (x + half < dim) s += at(y, x + half), ++cnt;
        at(y, x) = s / cnt + wobble * rng.uniform(-1.0, 1.0);
      }
  }
  auto [lo, hi] = std::minmax_element(m.begin(), m.end());
  const double span = std::max(*hi - *lo, 1e-12);
  const double base = *lo;
  for (auto& v : m) v = (v - base) / span;
  std::vector<double> out(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) out[static_cast<std::size_t>(y) * size + x] = at(y, x);
  return out;
}

Image apply(const Image& in, std::size_t kind, double s, Rng& rng) {
  switch (kind) {
    case 0: return per_value(in, [&](double v) { return v + s * rng.normal(); });
    case 1: return per_value(in, [&](double v) { return rng.poisson(std::max(v, 0.0) * s) / s; });
    case 2:
      return per_value(in, [&](double v) {
        double u = rng.uniform();
        if (u < s / 2) return 0.0;
        if (u < s) return 1.0;
        return v;
      });
    case 3: return per_value(in, [&](double v) { return v + v * s * rng.normal(); });
    case 4: return gaussian_blur(in, s);
    case 5: {
      const int r = static_cast<int>(std::ceil(s));
      std::vector<std::array<double, 3>> taps;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          if (dy * dy + dx * dx <= s * s) taps.push_back({static_cast<double>(dy), static_cast<double>(dx), 1.0});
      for (auto& t : taps) t[2] = 1.0 / static_cast<double>(taps.size());
      return convolve(in, taps);
    }
    case 6: {
      const double angle = rng.uniform(0.0, kPi);
      const int len = static_cast<int>(s);
      const double dy = std::sin(angle), dx = std::cos(angle);
      Image out(in.height, in.width, in.channels);
      for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x)
          for (int c = 0; c < in.channels; ++c) {
            double acc = 0;
            for (int k = 0; k < len; ++k) {
              const double t = k - (len - 1) / 2.0;
              acc += sample(in, y + t * dy, x + t * dx, c);
            }
            out.at(y, x, c) = clamp01(acc / len);
          }
      return out;
    }
    case 7: {
      constexpr int kSteps = 6;
      const double cy = (in.height - 1) / 2.0, cx = (in.width - 1) / 2.0;
      Image out(in.height, in.width, in.channels);
      for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x)
          for (int c = 0; c < in.channels; ++c) {
            double acc = 0;
            for (int k = 0; k < kSteps; ++k) {
              const double z = 1.0 + (s - 1.0) * k / (kSteps - 1);
              acc += sample(in, cy + (y - cy) / z, cx + (x - cx) / z, c);
            }
            out.at(y, x, c) = clamp01(acc / kSteps);
          }
      return out;
    }
    case 8: return per_value(in, [&](double v) { return v + s; });
    case 9: return per_value(in, [&](double v) { return 0.5 + s * (v - 0.5); });
    case 10: {
      Image out = in;
      for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
          const double gray = 0.299 * in.at(y, x, 0) + 0.587 * in.at(y, x, 1) + 0.114 * in.at(y, x, 2);
          for (int c = 0; c < in.channels; ++c) out.at(y, x, c) = clamp01(gray + s * (in.at(y, x, c) - gray));
        }
      return out;
    }
    case 11: return per_value(in, [&](double v) { return std::pow(std::clamp(v, 0.0, 1.0), s); });
    case 12: {
      const int size = std::max(in.height, in.width);
      auto fog = plasma(size, rng);
      const double peak = *std::max_element(in.data.begin(), in.data.end());
      Image out = in;
      for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x)
          for (int c = 0; c < in.channels; ++c) {
            const double v = in.at(y, x, c) + s * fog[static_cast<std::size_t>(y) * size + x];
            out.at(y, x, c) = clamp01(v * peak / (peak + s));
          }
      return out;
    }
    case 13: {
      auto fy = smooth_field(in.height, in.width, 3.0, rng);
      auto fx = smooth_field(in.height, in.width, 3.0, rng);
      Image out(in.height, in.width, in.channels);
      for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * in.width + x;
          for (int c = 0; c < in.channels; ++c) out.at(y, x, c) = clamp01(sample(in, y + s * fy[i], x + s * fx[i], c));
        }
      return out;
    }
    case 14: {
      const int b = static_cast<int>(s);
      Image out = in;
      for (int y0 = 0; y0 < in.height; y0 += b)
        for (int x0 = 0; x0 < in.width; x0 += b)
          for (int c = 0; c < in.channels; ++c) {
            const int y1 = std::min(y0 + b, in.height), x1 = std::min(x0 + b, in.width);
            double acc = 0;
            for (int y = y0; y < y1; ++y)
              for (int x = x0; x < x1; ++x) acc += in.at(y, x, c);
            const float mean = clamp01(acc / ((y1 - y0) * (x1 - x0)));
            for (int y = y0; y < y1; ++y)
              for (int x = x0; x < x1; ++x) out.at(y, x, c) = mean;
          }
      return out;
    }
    case 15: {
      const double levels = s - 1;
      return per_value(in, [&](double v) { return std::round(std::clamp(v, 0.0, 1.0) * levels) / levels; });
    }
    case 16: {
      constexpr int kBlock = 8;
      const int gh = in.height / kBlock, gw = in.width / kBlock;
      const int blocks = gh * gw;
      const int chosen = std::clamp(static_cast<int>(std::lround(s * blocks)), 2, blocks);
      std::vector<int> ids(static_cast<std::size_t>(blocks));
      std::iota(ids.begin(), ids.end(), 0);
      for (int i = blocks - 1; i > 0; --i) std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
      Image out = in;
      for (int k = 0; k < chosen; ++k) {
        // Cyclic rotation among the chosen blocks: every chosen block moves.
        const int dst = ids[static_cast<std::size_t>(k)];
        const int src = ids[static_cast<std::size_t>((k + 1) % chosen)];
        for (int y = 0; y < kBlock; ++y)
          for (int x = 0; x < kBlock; ++x)
            for (int c = 0; c < in.channels; ++c)
              out.at((dst / gw) * kBlock + y, (dst % gw) * kBlock + x, c) =
                  in.at((src / gw) * kBlock + y, (src % gw) * kBlock + x, c);
      }
      return out;
    }
    case 17: {
      const int side = std::max(1, static_cast<int>(std::lround(std::sqrt(s * in.height * in.width))));
      const int h = std::min(side, in.height), w = std::min(side, in.width);
      const int y0 = rng.uniform_int(in.height - h + 1), x0 = rng.uniform_int(in.width - w + 1);
      Image out = in;
      for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x)
          for (int c = 0; c < in.channels; ++c) out.at(y, x, c) = 0.0f;
      return out;
    }
    default: break;
  }
  throw std::logic_error("corrupt: registry index without implementation");
}

std::size_t kind_index(std::string_view kind) {
  for (std::size_t i = 0; i < kRegistry.size(); ++i)
    if (kRegistry[i].name == kind) return i;
  throw std::invalid_argument("unknown corruption kind '" + std::string(kind) + "'");
}

}  // namespace

std::span<const CorruptionInfo> list_corruptions() { return kRegistry; }

const CorruptionInfo& corruption_info(std::string_view kind) { return kRegistry[kind_index(kind)]; }

int blur_radius(const CorruptionInfo& info, int severity, int image_size) {
  if (severity < 1 || severity > kMaxSeverity) throw std::invalid_argument("blur_radius: severity outside [1, 5]");
  const double s = info.schedule[static_cast<std::size_t>(severity - 1)];
  if (info.name == "gaussian_blur") return static_cast<int>(std::ceil(3 * s));
  if (info.name == "defocus_blur") return static_cast<int>(std::ceil(s));
  if (info.name == "motion_blur") return static_cast<int>(s) / 2;
  if (info.name == "zoom_blur") return static_cast<int>(std::ceil((1.0 - 1.0 / s) * image_size / 2.0));
  return 0;
}

Image corrupt(const Image& image, const CorruptionSpec& spec) {
  const std::size_t k = kind_index(spec.kind);
  if (spec.severity < 1 || spec.severity > kMaxSeverity) {
    throw std::invalid_argument("corrupt: severity " + std::to_string(spec.severity) + " outside [1, 5]");
  }
  if (image.channels != 3) throw std::invalid_argument("corrupt: expects a 3-channel image");
  Rng rng(mix_seed(spec.seed, k * 16 + static_cast<std::size_t>(spec.severity)));
  return apply(image, k, kRegistry[k].schedule[static_cast<std::size_t>(spec.severity - 1)], rng);
}

std::string corruption_table() {
  std::ostringstream os;
  os << std::left << std::setw(19) << "kind" << std::setw(13) << "family" << std::setw(17) << "parameter";
  for (int s = 1; s <= kMaxSeverity; ++s) os << std::right << std::setw(8) << ("s" + std::to_string(s));
  os << '\n';
  for (const auto& c : kRegistry) {
    os << std::left << std::setw(19) << c.name << std::setw(13) << family_name(c.family) << std::setw(17)
       << c.parameter;
    for (double v : c.schedule) os << std::right << std::setw(8) << std::setprecision(4) << v;
    os << '\n';
  }
  return os.str();
}

}  // namespace catvil
