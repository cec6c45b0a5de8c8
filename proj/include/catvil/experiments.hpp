#pragma once

// Ablation, robustness and multi-seed runners built on train / evaluate.

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "catvil/corruption.hpp"
#include "catvil/training.hpp"

namespace catvil {

struct AblationRow {
  std::string label;     // display label
  std::string strategy;  // fusion strategy name
  int depth = 0;         // co-attention depth used
  bool ok = false;
  std::string error;  // set when the run failed
  MetricsReport metrics;
  double wall_seconds = 0;
};

struct AblationReport {
  std::string title;
  std::vector<AblationRow> rows;

  /// Columns: label, Acc, F-Score, mIoU (failed rows show the error instead).
  std::string to_text() const;
  nlohmann::json to_json() const;
};

/// Trains and evaluates every strategy with the same budget, seed and data. A
/// failure is recorded in its row and the remaining strategies still run.
AblationReport run_fusion_ablation(const TrainConfig& base, const Datasets& data,
                                   std::span<const FusionStrategy> strategies = all_fusion_strategies());

inline constexpr int kDefaultAblationDepths[] = {2, 4, 6, 8, 10};

AblationReport run_depth_ablation(const TrainConfig& base, const Datasets& data,
                                  std::span<const int> depths = kDefaultAblationDepths);

struct SeverityRow {
  int severity = 0;
  double accuracy = 0;
  double macro_f = 0;
  double miou = 0;
  std::vector<MetricsReport> per_kind;  // empty for severity 0
};

struct RobustnessReport {
  std::uint64_t seed = 0;
  std::vector<SeverityRow> rows;  // severities 0..5

  std::string to_text() const;
  nlohmann::json to_json() const;
};

/// Severity 0 is the clean evaluation. For 1..5 every image is corrupted with each
/// of the registered kinds and the per-kind metrics are averaged.
RobustnessReport run_robustness(VqlaModel& model, std::span<const VQLASample> test, std::uint64_t seed);

struct SeedSummary {
  std::vector<RunReport> runs;
  double accuracy_mean = 0, accuracy_std = 0;
  double f_mean = 0, f_std = 0;
  double miou_mean = 0, miou_std = 0;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Repeats training with seeds config.seed, config.seed + 1, ... (config.seeds runs).
SeedSummary run_seeds(const TrainConfig& config, const Datasets& data);

}  // namespace catvil
