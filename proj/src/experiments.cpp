#include "catvil/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <iomanip>
#include <sstream>
#include <thread>

namespace catvil {
namespace {

AblationRow run_row(const TrainConfig& config, const Datasets& data, std::string label) {
  AblationRow row;
  row.label = std::move(label);
  row.strategy = std::string(to_string(config.model.strategy));
  row.depth = config.model.coattn_depth;
  const auto start = std::chrono::steady_clock::now();
  try {
    TrainResult r = train(config, data);
    row.metrics = r.report.final_metrics();
    row.ok = true;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  sd = 0;
  for (double x : xs) sd += (x - mean) * (x - mean);
  sd = xs.size() > 1 ? std::sqrt(sd / static_cast<double>(xs.size() - 1)) : 0.0;
}

}  // namespace

std::string AblationReport::to_text() const {
  std::ostringstream os;
  std::size_t width = 8;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  os << title << '\n';
  os << std::left << std::setw(static_cast<int>(width) + 2) << "Method" << std::right << std::setw(8) << "Acc"
     << std::setw(10) << "F-Score" << std::setw(8) << "mIoU" << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(width) + 2) << r.label << std::right;
    if (r.ok) {
      os << std::setw(8) << r.metrics.accuracy << std::setw(10) << r.metrics.macro_f << std::setw(8) << r.metrics.miou;
    } else {
      os << "  failed: " << r.error;
    }
    os << '\n';
  }
  return os.str();
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j{{"label", r.label}, {"strategy", r.strategy}, {"depth", r.depth}, {"ok", r.ok},
                     {"wall_seconds", r.wall_seconds}};
    if (r.ok) {
      j["Acc"] = r.metrics.accuracy;
      j["F-Score"] = r.metrics.macro_f;
      j["mIoU"] = r.metrics.miou;
    } else {
      j["error"] = r.error;
    }
    rows_json.push_back(std::move(j));
  }
  return {{"title", title}, {"columns", {"Acc", "F-Score", "mIoU"}}, {"rows", rows_json}};
}

AblationReport run_fusion_ablation(const TrainConfig& base, const Datasets& data,
                                   std::span<const FusionStrategy> strategies) {
  AblationReport report;
  report.title = "Fusion strategy ablation";
  for (FusionStrategy s : strategies) {
    TrainConfig c = base;
    c.model.strategy = s;
    report.rows.push_back(run_row(c, data, std::string(display_name(s))));
  }
  return report;
}

AblationReport run_depth_ablation(const TrainConfig& base, const Datasets& data, std::span<const int> depths) {
  AblationReport report;
  report.title = "Co-attention depth ablation (" + std::string(display_name(base.model.strategy)) + ")";
  for (int d : depths) {
    TrainConfig c = base;
    c.model.coattn_depth = d;
    report.rows.push_back(run_row(c, data, "depth " + std::to_string(d)));
  }
  return report;
}

std::string RobustnessReport::to_text() const {
  std::ostringstream os;
  os << "Severity      Acc   F-Score     mIoU\n" << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    os << std::setw(8) << r.severity << std::setw(9) << r.accuracy << std::setw(10) << r.macro_f << std::setw(9)
       << r.miou << '\n';
  }
  return os.str();
}

nlohmann::json RobustnessReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  const auto kinds = list_corruptions();
  for (const auto& r : rows) {
    nlohmann::json per_kind = nlohmann::json::object();
    for (std::size_t k = 0; k < r.per_kind.size(); ++k) {
      const auto& m = r.per_kind[k];
      per_kind[std::string(kinds[k].name)] = {{"Acc", m.accuracy}, {"F-Score", m.macro_f}, {"mIoU", m.miou}};
    }
    rows_json.push_back(
        {{"severity", r.severity}, {"Acc", r.accuracy}, {"F-Score", r.macro_f}, {"mIoU", r.miou}, {"per_kind", per_kind}});
  }
  return {{"seed", seed}, {"rows", rows_json}};
}

RobustnessReport run_robustness(VqlaModel& model, std::span<const VQLASample> test, std::uint64_t seed) {
  RobustnessReport report;
  report.seed = seed;
  const MetricsReport clean = evaluate(model, test);
  report.rows.push_back({0, clean.accuracy, clean.macro_f, clean.miou, {}});

  const auto kinds = list_corruptions();
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  for (int severity = 1; severity <= kMaxSeverity; ++severity) {
    SeverityRow row;
    row.severity = severity;
    row.per_kind.resize(kinds.size());
    auto run_kind = [&](std::size_t k) {
      std::vector<VQLASample> corrupted(test.begin(), test.end());
      for (std::size_t i = 0; i < corrupted.size(); ++i) {
        corrupted[i].image = corrupt(corrupted[i].image, {std::string(kinds[k].name), severity, mix_seed(seed, i)});
      }
      return evaluate(model, corrupted);
    };
    // Kinds are independent, so they are evaluated concurrently; results land in fixed slots.
    for (std::size_t first = 0; first < kinds.size(); first += workers) {
      std::vector<std::future<MetricsReport>> jobs;
      for (std::size_t k = first; k < std::min(kinds.size(), first + workers); ++k) {
        jobs.push_back(std::async(std::launch::async, run_kind, k));
      }
      for (std::size_t j = 0; j < jobs.size(); ++j) row.per_kind[first + j] = jobs[j].get();
    }
    for (const auto& m : row.per_kind) {
      row.accuracy += m.accuracy;
      row.macro_f += m.macro_f;
      row.miou += m.miou;
    }
    const auto n = static_cast<double>(row.per_kind.size());
    row.accuracy /= n;
    row.macro_f /= n;
    row.miou /= n;
    report.rows.push_back(std::move(row));
  }
  return report;
}

nlohmann::json SeedSummary::to_json() const {
  nlohmann::json runs_json = nlohmann::json::array();
  for (const auto& r : runs) runs_json.push_back(r.to_json());
  return {{"runs", runs_json},
          {"Acc", {{"mean", accuracy_mean}, {"std", accuracy_std}}},
          {"F-Score", {{"mean", f_mean}, {"std", f_std}}},
          {"mIoU", {{"mean", miou_mean}, {"std", miou_std}}}};
}

std::string SeedSummary::to_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "seeds " << runs.size() << '\n';
  os << "Acc     " << accuracy_mean << " +- " << accuracy_std << '\n';
  os << "F-Score " << f_mean << " +- " << f_std << '\n';
  os << "mIoU    " << miou_mean << " +- " << miou_std << '\n';
  return os.str();
}

SeedSummary run_seeds(const TrainConfig& config, const Datasets& data) {
  SeedSummary s;
  std::vector<double> acc, f, miou;
  for (int i = 0; i < config.seeds; ++i) {
    TrainConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(i);
    TrainResult r = train(c, data);
    const MetricsReport& m = r.report.final_metrics();
    acc.push_back(m.accuracy);
    f.push_back(m.macro_f);
    miou.push_back(m.miou);
    s.runs.push_back(std::move(r.report));
  }
  mean_std(acc, s.accuracy_mean, s.accuracy_std);
  mean_std(f, s.f_mean, s.f_std);
  mean_std(miou, s.miou_mean, s.miou_std);
  return s;
}

}  // namespace catvil
