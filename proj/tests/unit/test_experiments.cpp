#include <gtest/gtest.h>

#include "catvil/experiments.hpp"

using namespace catvil;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.model.dim = 8;
  c.model.heads = 2;
  c.model.ffn_hidden = 16;
  c.model.coattn_depth = 1;
  c.model.encoder_depth = 1;
  c.model.image_size = 32;
  c.model.patch_size = 8;
  c.model.text_length = 12;
  c.epochs = 1;
  c.batch_size = 4;
  c.learning_rate = 1e-3;
  return c;
}

Datasets tiny_data() { return {generate_dataset(1, 8, 32), generate_dataset(2, 4, 32)}; }

}  // namespace

TEST(Ablation, FusionCoversEveryStrategy) {
  AblationReport r = run_fusion_ablation(tiny_config(), tiny_data());
  ASSERT_EQ(r.rows.size(), 12u);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(row.ok) << row.label << ": " << row.error;
    EXPECT_EQ(row.metrics.count, 4u);
  }
  nlohmann::json j = r.to_json();
  EXPECT_EQ(j["columns"], (nlohmann::json{"Acc", "F-Score", "mIoU"}));
  EXPECT_EQ(j["rows"].size(), 12u);
  const std::string text = r.to_text();
  EXPECT_NE(text.find("F-Score"), std::string::npos);
}

TEST(Ablation, DepthEchoesRequestedDepths) {
  const int depths[] = {1, 2};
  AblationReport r = run_depth_ablation(tiny_config(), tiny_data(), depths);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].depth, 1);
  EXPECT_EQ(r.rows[1].depth, 2);
  EXPECT_EQ(std::size(kDefaultAblationDepths), 5u);
}

TEST(Ablation, FailingRowIsRecorded) {
  TrainConfig bad = tiny_config();
  bad.learning_rate = -1;
  AblationReport r = run_fusion_ablation(bad, tiny_data());
  ASSERT_EQ(r.rows.size(), 12u);
  for (const auto& row : r.rows) {
    EXPECT_FALSE(row.ok);
    EXPECT_FALSE(row.error.empty());
  }
}

TEST(Robustness, SixSeveritiesAndCleanRowMatchesEvaluate) {
  Datasets d = tiny_data();
  TrainResult t = train(tiny_config(), d);
  RobustnessReport a = run_robustness(t.model, d.test, 3);
  ASSERT_EQ(a.rows.size(), 6u);
  MetricsReport clean = evaluate(t.model, d.test);
  EXPECT_EQ(a.rows[0].accuracy, clean.accuracy);
  EXPECT_EQ(a.rows[0].miou, clean.miou);
  for (int s = 1; s <= 5; ++s) {
    EXPECT_EQ(a.rows[static_cast<std::size_t>(s)].severity, s);
    EXPECT_EQ(a.rows[static_cast<std::size_t>(s)].per_kind.size(), 18u);
  }
  RobustnessReport b = run_robustness(t.model, d.test, 3);
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(Seeds, SummaryOverConsecutiveSeeds) {
  TrainConfig c = tiny_config();
  c.seeds = 2;
  SeedSummary s = run_seeds(c, tiny_data());
  ASSERT_EQ(s.runs.size(), 2u);
  EXPECT_EQ(s.runs[1].seed, s.runs[0].seed + 1);
  EXPECT_GE(s.accuracy_std, 0.0);
}
