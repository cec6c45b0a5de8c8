#include "catvil/losses_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace catvil {
namespace {

constexpr double kProbFloor = 1e-12;
constexpr double kAreaEps = 1e-9;

void require_nonempty_pair(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": lists have different lengths");
  if (a == 0) throw std::invalid_argument(std::string(what) + ": empty input");
}

ad::Var product_of_columns(ad::Var row2) { return ad::mul(ad::slice_cols(row2, 0, 1), ad::slice_cols(row2, 1, 1)); }

Matrix pair_row(double a, double b) {
  Matrix m(1, 2);
  m << a, b;
  return m;
}

}  // namespace

double cross_entropy(std::span<const double> probs, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= probs.size()) {
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) + " outside [0, " +
                            std::to_string(probs.size()) + ")");
  }
  return -std::log(std::max(probs[static_cast<std::size_t>(target)], kProbFloor));
}

double l1_box(const PredictedBox& pred, const BoundingBox& gt) {
  const PredictedBox c = corners_to_center(gt);
  return std::abs(pred.cx - c.cx) + std::abs(pred.cy - c.cy) + std::abs(pred.w - c.w) + std::abs(pred.h - c.h);
}

double box_area(const BoundingBox& b) { return std::max(0.0, b.x2 - b.x1) * std::max(0.0, b.y2 - b.y1); }

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = box_area(a) + box_area(b) - inter;
  return inter / std::max(uni, kAreaEps);
}

double giou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = box_area(a) + box_area(b) - inter;
  const double cw = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
  const double ch = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
  const double enclosure = std::max(0.0, cw) * std::max(0.0, ch);
  return inter / std::max(uni, kAreaEps) - (enclosure - uni) / std::max(enclosure, kAreaEps);
}

double giou_loss(const BoundingBox& pred, const BoundingBox& gt) { return 1.0 - giou(pred, gt); }
double giou_loss(const PredictedBox& pred, const BoundingBox& gt) { return giou_loss(box_to_corners(pred), gt); }

LossBreakdown total_loss(std::span<const double> probs, int target, const PredictedBox& pred, const BoundingBox& gt,
                         const LossWeights& weights) {
  LossBreakdown out;
  out.ce = cross_entropy(probs, target);
  out.giou_loss = giou_loss(pred, gt);
  out.l1 = l1_box(pred, gt);
  out.total = weights.ce * out.ce + weights.giou * out.giou_loss + weights.l1 * out.l1;
  return out;
}

ad::Var l1_box(ad::Graph& g, ad::Var pred, const BoundingBox& gt) {
  const PredictedBox c = corners_to_center(gt);
  Matrix target(1, 4);
  target << c.cx, c.cy, c.w, c.h;
  return ad::sum(ad::abs(ad::sub(pred, g.constant(std::move(target)))));
}

ad::Var giou_loss(ad::Graph& g, ad::Var pred, const BoundingBox& gt) {
  if (pred.rows() != 1 || pred.cols() != 4) throw std::invalid_argument("giou_loss: prediction must be 1x4");
  ad::Var center = ad::slice_cols(pred, 0, 2);
  ad::Var half = ad::scale(ad::slice_cols(pred, 2, 2), 0.5);
  ad::Var lo = ad::clamp(ad::sub(center, half), 0.0, 1.0);
  ad::Var hi = ad::clamp(ad::add(center, half), 0.0, 1.0);
  ad::Var glo = g.constant(pair_row(gt.x1, gt.y1));
  ad::Var ghi = g.constant(pair_row(gt.x2, gt.y2));
  ad::Var eps = g.constant(Matrix::Constant(1, 1, kAreaEps));

  ad::Var inter = product_of_columns(ad::relu(ad::sub(ad::minimum(hi, ghi), ad::maximum(lo, glo))));
  ad::Var area_p = product_of_columns(ad::relu(ad::sub(hi, lo)));
  ad::Var uni = ad::sub(ad::add_scalar(area_p, box_area(gt)), inter);
  ad::Var enclosure = product_of_columns(ad::relu(ad::sub(ad::maximum(hi, ghi), ad::minimum(lo, glo))));
  ad::Var iou_term = ad::div(inter, ad::maximum(uni, eps));
  ad::Var slack = ad::div(ad::sub(enclosure, uni), ad::maximum(enclosure, eps));
  return ad::one_minus(ad::sub(iou_term, slack));
}

LossTerms loss_terms(ad::Graph& g, ad::Var logits, ad::Var pred_box, int target, const BoundingBox& gt,
                     const LossWeights& weights) {
  LossTerms t;
  t.ce = ad::cross_entropy_logits(logits, target);
  t.giou_loss = giou_loss(g, pred_box, gt);
  t.l1 = l1_box(g, pred_box, gt);
  t.total = ad::add(ad::add(ad::scale(t.ce, weights.ce), ad::scale(t.giou_loss, weights.giou)),
                    ad::scale(t.l1, weights.l1));
  return t;
}

double accuracy(std::span<const int> preds, std::span<const int> targets) {
  require_nonempty_pair(preds.size(), targets.size(), "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == targets[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double macro_f(std::span<const int> preds, std::span<const int> targets, int num_classes) {
  return compute_metrics(preds, targets, std::vector<BoundingBox>(preds.size()),
                         std::vector<BoundingBox>(targets.size()), num_classes)
      .macro_f;
}

double mean_iou(std::span<const BoundingBox> preds, std::span<const BoundingBox> gts) {
  require_nonempty_pair(preds.size(), gts.size(), "mean_iou");
  double total = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const BoundingBox& p = preds[i];
    BoundingBox clamped{std::clamp(p.x1, 0.0, 1.0), std::clamp(p.y1, 0.0, 1.0), std::clamp(p.x2, 0.0, 1.0),
                        std::clamp(p.y2, 0.0, 1.0)};
    total += iou(clamped, gts[i]);
  }
  return total / static_cast<double>(preds.size());
}

MetricsReport compute_metrics(std::span<const int> preds, std::span<const int> targets,
                              std::span<const BoundingBox> pred_boxes, std::span<const BoundingBox> gt_boxes,
                              int num_classes) {
  require_nonempty_pair(preds.size(), targets.size(), "compute_metrics");
  require_nonempty_pair(pred_boxes.size(), preds.size(), "compute_metrics");
  require_nonempty_pair(gt_boxes.size(), targets.size(), "compute_metrics");
  if (num_classes < 1) throw std::invalid_argument("compute_metrics: num_classes must be positive");
  const auto nc = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> tp(nc, 0), predicted(nc, 0), support(nc, 0);
  MetricsReport r;
  r.count = preds.size();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= num_classes || targets[i] < 0 || targets[i] >= num_classes) {
      throw std::out_of_range("compute_metrics: class id outside [0, " + std::to_string(num_classes) + ")");
    }
    ++predicted[static_cast<std::size_t>(preds[i])];
    ++support[static_cast<std::size_t>(targets[i])];
    if (preds[i] == targets[i]) {
      ++tp[static_cast<std::size_t>(preds[i])];
      ++r.correct;
    }
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.count);
  r.precision.assign(nc, 0.0);
  r.recall.assign(nc, 0.0);
  double f_sum = 0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    if (support[c] == 0 && predicted[c] == 0) continue;
    const double p = predicted[c] ? static_cast<double>(tp[c]) / static_cast<double>(predicted[c]) : 0.0;
    const double rc = support[c] ? static_cast<double>(tp[c]) / static_cast<double>(support[c]) : 0.0;
    r.precision[c] = p;
    r.recall[c] = rc;
    f_sum += (p + rc) > 0 ? 2 * p * rc / (p + rc) : 0.0;
    ++classes;
  }
  r.macro_f = f_sum / static_cast<double>(classes);
  r.miou = mean_iou(pred_boxes, gt_boxes);
  return r;
}

nlohmann::json MetricsReport::to_json() const {
  return {{"accuracy", accuracy}, {"f_score", macro_f}, {"miou", miou},           {"count", count},
          {"correct", correct},   {"precision", precision}, {"recall", recall}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.accuracy = j.at("accuracy").get<double>();
  r.macro_f = j.at("f_score").get<double>();
  r.miou = j.at("miou").get<double>();
  r.count = j.at("count").get<std::size_t>();
  r.correct = j.at("correct").get<std::size_t>();
  r.precision = j.at("precision").get<std::vector<double>>();
  r.recall = j.at("recall").get<std::vector<double>>();
  return r;
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  os << "accuracy " << accuracy << '\n';
  os << "f_score " << macro_f << '\n';
  os << "miou " << miou << '\n';
  os << "count " << count << '\n';
  os << "correct " << correct << '\n';
  return os.str();
}

}  // namespace catvil
