#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "catvil/config.hpp"
#include "catvil/corruption.hpp"
#include "catvil/experiments.hpp"
#include "catvil/training.hpp"

namespace fs = std::filesystem;
using namespace catvil;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  if (!path.empty()) write_text(path, j.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Co-attention gated vision-language model for localized question answering on synthetic scenes"};
  app.require_subcommand(1);

  std::string out_dir, config_path, ckpt_path, data_dir, json_path;
  int train_n = 512, test_n = 128, image_size = kDefaultImageSize, seeds = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> strategy_names;
  std::vector<int> depths;

  auto* generate = app.add_subcommand("generate", "Write train/ and test/ synthetic datasets");
  generate->add_option("--out", out_dir, "Output directory")->required();
  generate->add_option("--train-n", train_n, "Training samples")->check(CLI::PositiveNumber);
  generate->add_option("--test-n", test_n, "Test samples")->check(CLI::PositiveNumber);
  generate->add_option("--seed", seed, "Dataset seed");
  generate->add_option("--image-size", image_size, "Image side in pixels")->check(CLI::Range(32, 1024));

  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint and report");
  train_cmd->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out_dir, "Output directory (overrides out_dir)");
  train_cmd->add_option("--seeds", seeds, "Repeat over this many consecutive seeds")->check(CLI::PositiveNumber);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset directory");
  eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--json", json_path, "Also write the report as JSON");

  auto* fusion_cmd = app.add_subcommand("ablate-fusion", "Train and evaluate every fusion strategy");
  fusion_cmd->add_option("--config", config_path, "Base config file")->required()->check(CLI::ExistingFile);
  fusion_cmd->add_option("--strategies", strategy_names, "Subset of strategies (default: all)");
  fusion_cmd->add_option("--json", json_path, "Also write the report as JSON");

  auto* depth_cmd = app.add_subcommand("ablate-depth", "Train and evaluate several co-attention depths");
  depth_cmd->add_option("--config", config_path, "Base config file")->required()->check(CLI::ExistingFile);
  depth_cmd->add_option("--depths", depths, "Depths (default: 2 4 6 8 10)");
  depth_cmd->add_option("--json", json_path, "Also write the report as JSON");

  auto* robust_cmd = app.add_subcommand("robust-eval", "Evaluate under every corruption at severities 1-5");
  robust_cmd->add_option("--ckpt", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  robust_cmd->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  robust_cmd->add_option("--seed", seed, "Corruption seed");
  robust_cmd->add_option("--json", json_path, "Also write the report as JSON");

  auto* corruptions_cmd = app.add_subcommand("corruptions", "Print the corruption registry");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) {
      const fs::path root(out_dir);
      write_dataset(generate_dataset(seed, static_cast<std::size_t>(train_n), image_size), root / "train");
      write_dataset(generate_dataset(test_split_seed(seed), static_cast<std::size_t>(test_n), image_size), root / "test");
      std::cout << "wrote " << train_n << " train and " << test_n << " test samples to " << root.string() << '\n';
    } else if (*train_cmd) {
      TrainConfig config = load_config(config_path);
      if (!out_dir.empty()) config.out_dir = out_dir;
      if (seeds > 0) config.seeds = seeds;
      const Datasets data = load_datasets(config);
      const fs::path root(config.out_dir);
      fs::create_directories(root);
      write_text(root / "config.txt", config.to_text());
      if (config.seeds > 1) {
        const SeedSummary summary = run_seeds(config, data);
        std::cout << summary.to_text();
        write_json((root / "seeds.json").string(), summary.to_json());
      } else {
        TrainResult r = train(config, data, [](int step, const LossBreakdown& b) {
          if (step % 50 == 0) std::cerr << "step " << step << " loss " << b.total << '\n';
        });
        r.model.save(root / "model.ckpt");
        std::cout << r.report.to_text();
        write_text(root / "report.txt", r.report.to_text());
        write_json((root / "report.json").string(), r.report.to_json());
      }
    } else if (*eval_cmd) {
      VqlaModel model = VqlaModel::load(ckpt_path);
      const MetricsReport m = evaluate(model, read_dataset(data_dir));
      std::cout << m.to_text();
      write_json(json_path, m.to_json());
    } else if (*fusion_cmd) {
      const TrainConfig config = load_config(config_path);
      std::vector<FusionStrategy> strategies;
      for (const auto& name : strategy_names) strategies.push_back(parse_fusion_strategy(name));
      const Datasets data = load_datasets(config);
      const AblationReport report =
          strategies.empty() ? run_fusion_ablation(config, data) : run_fusion_ablation(config, data, strategies);
      std::cout << report.to_text();
      write_json(json_path, report.to_json());
    } else if (*depth_cmd) {
      const TrainConfig config = load_config(config_path);
      const Datasets data = load_datasets(config);
      const AblationReport report =
          depths.empty() ? run_depth_ablation(config, data) : run_depth_ablation(config, data, depths);
      std::cout << report.to_text();
      write_json(json_path, report.to_json());
    } else if (*robust_cmd) {
      VqlaModel model = VqlaModel::load(ckpt_path);
      const RobustnessReport report = run_robustness(model, read_dataset(data_dir), seed);
      std::cout << report.to_text();
      write_json(json_path, report.to_json());
    } else if (*corruptions_cmd) {
      std::cout << corruption_table();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
