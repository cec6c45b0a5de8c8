#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "catvil/losses_metrics.hpp"
#include "support/grad_check.hpp"
#include "support/oracles.hpp"

using namespace catvil;
using catvil::testing::check_gradients;
using catvil::testing::raster_giou;

namespace {

BoundingBox random_box(Rng& rng) {
  const double x1 = rng.uniform(0, 0.8), y1 = rng.uniform(0, 0.8);
  return {x1, y1, rng.uniform(x1 + 0.05, 1.0), rng.uniform(y1 + 0.05, 1.0)};
}

}  // namespace

TEST(CrossEntropy, Examples) {
  std::vector<double> onehot(18, 0.0);
  onehot[4] = 1.0;
  EXPECT_EQ(cross_entropy(onehot, 4), 0.0);
  std::vector<double> uniform(18, 1.0 / 18);
  EXPECT_NEAR(cross_entropy(uniform, 7), std::log(18.0), 1e-12);
  EXPECT_NEAR(cross_entropy(uniform, 7), 2.8904, 1e-4);
  EXPECT_NEAR(cross_entropy(onehot, 0), -std::log(1e-12), 1e-9);
  EXPECT_THROW(cross_entropy(uniform, 18), std::out_of_range);
  EXPECT_THROW(cross_entropy(uniform, -1), std::out_of_range);
}

TEST(L1Box, Examples) {
  BoundingBox gt{0.2, 0.3, 0.6, 0.9};
  EXPECT_NEAR(l1_box(corners_to_center(gt), gt), 0.0, 1e-15);
  EXPECT_NEAR(l1_box(PredictedBox{0.5, 0.5, 0.5, 0.5}, BoundingBox{0, 0, 1, 1}), 1.0, 1e-15);
  // Symmetric: swap the roles of prediction and ground truth.
  BoundingBox other{0.1, 0.1, 0.5, 0.4};
  EXPECT_NEAR(l1_box(corners_to_center(gt), other), l1_box(corners_to_center(other), gt), 1e-15);
}

TEST(Giou, HandCases) {
  BoundingBox a{0.1, 0.2, 0.5, 0.7};
  EXPECT_NEAR(giou(a, a), 1.0, 1e-12);
  EXPECT_NEAR(giou({0, 0, 2, 2}, {1, 1, 3, 3}), -5.0 / 63, 1e-9);
  EXPECT_NEAR(giou({0, 0, 1, 1}, {2, 2, 3, 3}), -7.0 / 9, 1e-9);
  EXPECT_NEAR(giou_loss(BoundingBox{0, 0, 2, 2}, BoundingBox{1, 1, 3, 3}), 1 + 5.0 / 63, 1e-9);
  EXPECT_NEAR(giou_loss(BoundingBox{0, 0, 1, 1}, BoundingBox{2, 2, 3, 3}), 1 + 7.0 / 9, 1e-9);
  EXPECT_EQ(giou_loss(a, a), 0.0);
}

TEST(Giou, PropertiesOnRandomPairs) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    BoundingBox a = random_box(rng), b = random_box(rng);
    EXPECT_NEAR(giou(a, b), giou(b, a), 1e-15);
    EXPECT_LE(giou(a, b), iou(a, b) + 1e-15);
    EXPECT_GE(giou(a, b), -1.0);
    EXPECT_LE(giou(a, b), 1.0);
  }
  BoundingBox outer{0.1, 0.1, 0.9, 0.9}, inner{0.3, 0.2, 0.5, 0.6};
  EXPECT_NEAR(giou(outer, inner), iou(outer, inner), 1e-15);
}

TEST(Giou, FarApartApproachesMinusOne) {
  EXPECT_LT(giou({0, 0, 1, 1}, {100, 100, 101, 101}), -0.9);
}

TEST(Giou, DegenerateBoxIsFinite) {
  EXPECT_TRUE(std::isfinite(giou({0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5})));
  EXPECT_TRUE(std::isfinite(giou({0.2, 0.2, 0.2, 0.6}, {0.1, 0.1, 0.3, 0.3})));
}

TEST(Giou, MatchesRasterOracle) {
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    BoundingBox a = random_box(rng), b = random_box(rng);
    EXPECT_NEAR(giou(a, b), raster_giou(a, b, 0.0, 1.0), 2e-2);
  }
}

TEST(Giou, LossGradientMatchesFiniteDifferences) {
  Rng rng(3);
  int checked = 0;
  while (checked < 30) {
    Matrix pred(1, 4);
    pred << rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75), rng.uniform(0.1, 0.4), rng.uniform(0.1, 0.4);
    BoundingBox gt = random_box(rng);
    // Skip configurations within a few steps of a corner coincidence (non-differentiable).
    const double lo_x = pred(0, 0) - pred(0, 2) / 2, hi_x = pred(0, 0) + pred(0, 2) / 2;
    const double lo_y = pred(0, 1) - pred(0, 3) / 2, hi_y = pred(0, 1) + pred(0, 3) / 2;
    bool near_kink = false;
    for (double p : {lo_x, hi_x})
      for (double q : {gt.x1, gt.x2}) near_kink |= std::abs(p - q) < 1e-3;
    for (double p : {lo_y, hi_y})
      for (double q : {gt.y1, gt.y2}) near_kink |= std::abs(p - q) < 1e-3;
    if (near_kink) continue;
    Param p{pred};
    auto r = check_gradients([&](ad::Graph& g) { return giou_loss(g, g.param(p), gt); }, {{"pred", &p}},
                             static_cast<std::uint64_t>(checked));
    EXPECT_LT(r.max_rel_error, 1e-4);
    ad::Graph g(ad::GradMode::kInference);
    EXPECT_NEAR(giou_loss(g, g.constant(pred), gt).value()(0, 0),
                giou_loss(PredictedBox{pred(0, 0), pred(0, 1), pred(0, 2), pred(0, 3)}, gt), 1e-12);
    ++checked;
  }
}

TEST(TotalLoss, ComponentsAddUp) {
  std::vector<double> probs(18, 0.0);
  probs[2] = 1.0;
  BoundingBox gt{0.1, 0.2, 0.4, 0.8};
  LossBreakdown perfect = total_loss(probs, 2, corners_to_center(gt), gt);
  EXPECT_NEAR(perfect.total, 0.0, 1e-15);

  std::vector<double> soft(18, 0.5 / 17);
  soft[2] = 0.5;
  PredictedBox pred{0.5, 0.5, 0.3, 0.3};
  LossBreakdown b = total_loss(soft, 2, pred, gt);
  EXPECT_EQ(b.total, b.ce + b.giou_loss + b.l1);
  EXPECT_NEAR(b.ce, std::log(2.0), 1e-15);
  EXPECT_NEAR(b.giou_loss, 1.0 - giou(box_to_corners(pred), gt), 1e-15);
  EXPECT_NEAR(b.l1, std::abs(0.5 - 0.25) + std::abs(0.5 - 0.5) + std::abs(0.3 - 0.3) + std::abs(0.3 - 0.6), 1e-15);
}

TEST(Metrics, PerfectPredictions) {
  std::vector<int> y{0, 3, 3, 17};
  std::vector<BoundingBox> boxes(4, BoundingBox{0.1, 0.1, 0.5, 0.5});
  MetricsReport r = compute_metrics(y, y, boxes, boxes);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.macro_f, 1.0);
  EXPECT_NEAR(r.miou, 1.0, 1e-15);
  EXPECT_EQ(r.correct, 4u);
}

TEST(Metrics, HandConfusionMatrix) {
  std::vector<int> targets{0, 0, 1}, preds{0, 1, 1};
  EXPECT_NEAR(macro_f(preds, targets, 18), 2.0 / 3, 1e-15);
  EXPECT_NEAR(accuracy(preds, targets), 2.0 / 3, 1e-15);
}

TEST(Metrics, MeanIouExample) {
  std::vector<BoundingBox> gt{{0, 0, 0.5, 0.5}, {0, 0, 0.4, 0.4}};
  std::vector<BoundingBox> pred{{0, 0, 0.5, 0.5}, {0.2, 0.2, 0.6, 0.6}};
  EXPECT_NEAR(iou(pred[1], gt[1]), 1.0 / 7, 1e-15);
  EXPECT_NEAR(mean_iou(pred, gt), 4.0 / 7, 1e-15);
}

TEST(Metrics, RangesAndErrors) {
  Rng rng(4);
  std::vector<int> p, t;
  std::vector<BoundingBox> pb, tb;
  for (int i = 0; i < 40; ++i) {
    p.push_back(rng.uniform_int(18));
    t.push_back(rng.uniform_int(18));
    pb.push_back(random_box(rng));
    tb.push_back(random_box(rng));
  }
  MetricsReport r = compute_metrics(p, t, pb, tb);
  for (double v : {r.accuracy, r.macro_f, r.miou}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_LE(r.correct, r.count);
  EXPECT_EQ(r.accuracy, static_cast<double>(r.correct) / static_cast<double>(r.count));
  std::vector<int> empty;
  std::vector<BoundingBox> none;
  EXPECT_THROW(accuracy(empty, empty), std::invalid_argument);
  EXPECT_THROW(mean_iou(none, none), std::invalid_argument);
  EXPECT_THROW(macro_f(p, std::vector<int>{1}, 18), std::invalid_argument);
}

TEST(Metrics, JsonAndTextRecords) {
  std::vector<int> t{0, 1, 1}, p{0, 1, 0};
  std::vector<BoundingBox> b(3, BoundingBox{0.2, 0.2, 0.4, 0.4});
  MetricsReport r = compute_metrics(p, t, b, b);
  MetricsReport back = MetricsReport::from_json(nlohmann::json::parse(r.to_json().dump()));
  EXPECT_EQ(back.accuracy, r.accuracy);
  EXPECT_EQ(back.macro_f, r.macro_f);
  EXPECT_EQ(back.miou, r.miou);
  EXPECT_EQ(back.precision, r.precision);
  const std::string text = r.to_text();
  EXPECT_NE(text.find("accuracy "), std::string::npos);
  EXPECT_NE(text.find("f_score "), std::string::npos);
  EXPECT_NE(text.find("miou "), std::string::npos);
}
