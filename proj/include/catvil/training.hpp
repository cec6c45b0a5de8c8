#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "catvil/config.hpp"
#include "catvil/losses_metrics.hpp"
#include "catvil/model.hpp"
#include "catvil/synth_data.hpp"

namespace catvil {

struct Datasets {
  std::vector<VQLASample> train;
  std::vector<VQLASample> test;
};

/// Seed of the held-out split generated alongside a training split with seed s.
std::uint64_t test_split_seed(std::uint64_t data_seed);

/// Reads train_data / test_data when set, otherwise generates train_n / test_n samples from data_seed.
Datasets load_datasets(const TrainConfig& config);

Vocabulary build_vocabulary(std::span<const VQLASample> samples);

class Adam {
 public:
  Adam(ParamList params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  /// Applies one update from the accumulated gradients, then zeroes them.
  void step();
  int steps() const { return t_; }

 private:
  ParamList params_;
  std::vector<Matrix> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
};

struct RunReport {
  TrainConfig config;
  std::uint64_t seed = 0;
  std::vector<LossBreakdown> epochs;  // mean over the samples seen in each epoch
  int steps = 0;
  MetricsReport train_metrics;
  std::optional<MetricsReport> test_metrics;
  double wall_seconds = 0;

  /// The test metrics when a test split was evaluated, else the training metrics.
  const MetricsReport& final_metrics() const { return test_metrics ? *test_metrics : train_metrics; }
  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Called after every optimizer step with the batch-mean loss components.
using StepHook = std::function<void(int step, const LossBreakdown& batch)>;

/// Single-stage end-to-end optimization of the weighted total loss on `train`.
/// Throws TrainingError naming the epoch, batch and sample on a non-finite loss.
/// Learning rate 0 is allowed here and leaves the parameters untouched.
RunReport train_model(VqlaModel& model, std::span<const VQLASample> train, const TrainConfig& config,
                      std::span<const VQLASample> test = {}, const StepHook& hook = {});

struct TrainResult {
  VqlaModel model;
  RunReport report;
};

/// Builds the vocabulary from the training questions, initializes from config.seed and trains.
TrainResult train(const TrainConfig& config, const Datasets& data, const StepHook& hook = {});

/// Per-sample inference; independent of any batching. Throws on an empty dataset or
/// a model whose class count differs from the dataset's label space.
MetricsReport evaluate(VqlaModel& model, std::span<const VQLASample> samples);

}  // namespace catvil
