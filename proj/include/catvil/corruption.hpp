#pragma once

// Procedural image corruptions at five severity levels for robustness evaluation.
// Every kind is driven by a fixed five-entry parameter schedule that is strictly
// monotone in severity; outputs are clamped to [0, 1] and depend only on
// (image, kind, severity, seed).

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "catvil/synth_data.hpp"

namespace catvil {

inline constexpr int kNumCorruptions = 18;
inline constexpr int kMaxSeverity = 5;

enum class CorruptionFamily { kNoise, kBlur, kPhotometric, kGeometric, kDigital, kOcclusion };

struct CorruptionInfo {
  std::string_view name;
  CorruptionFamily family;
  std::string_view parameter;  // what the schedule controls
  std::array<double, kMaxSeverity> schedule;
  /// +1 if the schedule grows with severity, -1 if it shrinks.
  int trend;
};

struct CorruptionSpec {
  std::string kind;
  int severity = 1;
  std::uint64_t seed = 0;
};

/// Stable ordering; exactly kNumCorruptions entries.
std::span<const CorruptionInfo> list_corruptions();
const CorruptionInfo& corruption_info(std::string_view kind);

/// Spatial support radius in pixels for blur kinds at a severity (0 for other kinds).
int blur_radius(const CorruptionInfo& info, int severity, int image_size = kDefaultImageSize);

/// Throws std::invalid_argument for an unknown kind or a severity outside [1, 5].
Image corrupt(const Image& image, const CorruptionSpec& spec);

/// Registry as an aligned text table.
std::string corruption_table();

}  // namespace catvil
