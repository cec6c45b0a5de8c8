#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "catvil/autodiff.hpp"
#include "catvil/encoder_heads.hpp"
#include "catvil/synth_data.hpp"

namespace catvil {

struct LossWeights {
  double ce = 1.0;
  double giou = 1.0;
  double l1 = 1.0;
};

struct LossBreakdown {
  double ce = 0;
  double l1 = 0;
  double giou_loss = 0;
  double total = 0;
};

/// -log(probs[target]) with probs clamped below at 1e-12.
double cross_entropy(std::span<const double> probs, int target);
/// Sum of absolute differences in center form.
double l1_box(const PredictedBox& pred, const BoundingBox& gt);

double box_area(const BoundingBox& b);
double iou(const BoundingBox& a, const BoundingBox& b);
/// IoU minus the fraction of the enclosing box not covered by the union; in [-1, 1].
/// Works on raw (unnormalized) coordinates as well.
double giou(const BoundingBox& a, const BoundingBox& b);
double giou_loss(const BoundingBox& pred, const BoundingBox& gt);
double giou_loss(const PredictedBox& pred, const BoundingBox& gt);

LossBreakdown total_loss(std::span<const double> probs, int target, const PredictedBox& pred, const BoundingBox& gt,
                         const LossWeights& weights = {});

// ---- differentiable versions ----------------------------------------------

/// pred is a 1x4 (cx, cy, w, h) row.
ad::Var l1_box(ad::Graph& g, ad::Var pred, const BoundingBox& gt);
ad::Var giou_loss(ad::Graph& g, ad::Var pred, const BoundingBox& gt);

struct LossTerms {
  ad::Var ce;
  ad::Var giou_loss;
  ad::Var l1;
  ad::Var total;
};

LossTerms loss_terms(ad::Graph& g, ad::Var logits, ad::Var pred_box, int target, const BoundingBox& gt,
                     const LossWeights& weights = {});

// ---- evaluation metrics ----------------------------------------------------

double accuracy(std::span<const int> preds, std::span<const int> targets);
/// Unweighted mean of per-class F1 over classes that occur in targets or predictions.
double macro_f(std::span<const int> preds, std::span<const int> targets, int num_classes);
double mean_iou(std::span<const BoundingBox> preds, std::span<const BoundingBox> gts);

struct MetricsReport {
  double accuracy = 0;
  double macro_f = 0;
  double miou = 0;
  std::size_t count = 0;
  std::size_t correct = 0;
  std::vector<double> precision;  // per class
  std::vector<double> recall;     // per class

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  /// One "key value" pair per line.
  std::string to_text() const;
};

MetricsReport compute_metrics(std::span<const int> preds, std::span<const int> targets,
                              std::span<const BoundingBox> pred_boxes, std::span<const BoundingBox> gt_boxes,
                              int num_classes = kNumClasses);

}  // namespace catvil
