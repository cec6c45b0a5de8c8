#pragma once

// Training configuration read from a flat "key = value" text file.
//
// Recognized keys (unknown keys are rejected):
//   preset          desk | paper (applied first, other keys override it)
//   epochs batch_size learning_rate seed max_steps seeds
//   dim heads ffn_hidden coattn_depth encoder_depth image_size patch_size text_length
//   encoder         patch | conv
//   fusion          one of the fusion strategy names
//   gate_mode       feature | scalar
//   ce_weight giou_weight l1_weight
//   train_data test_data out_dir      dataset directories / output directory
//   data_seed train_n test_n          used when no dataset directory is given
// Lines starting with '#' and blank lines are ignored.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "catvil/losses_metrics.hpp"
#include "catvil/model.hpp"

namespace catvil {

struct TrainConfig {
  ModelConfig model;
  int epochs = 20;
  int batch_size = 16;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  /// Stop after this many optimizer steps; 0 means no limit.
  int max_steps = 0;
  /// Number of consecutive seeds for multi-seed runs.
  int seeds = 1;
  LossWeights weights;
  std::string train_data;
  std::string test_data;
  std::string out_dir = "run";
  std::uint64_t data_seed = 0;
  int train_n = 512;
  int test_n = 128;

  /// Throws std::invalid_argument unless batch >= 1, lr > 0 and the model config is valid.
  void validate() const;
  nlohmann::json to_json() const;
  /// Serializes back to the key = value format accepted by parse_config.
  std::string to_text() const;
};

/// "desk" is the default scale; "paper" uses 80 epochs, batch 64, lr 1e-5 and depth 6.
TrainConfig preset_config(std::string_view name);

TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);

}  // namespace catvil
