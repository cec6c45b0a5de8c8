#include "catvil/training.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "catvil/errors.hpp"

namespace catvil {
namespace {

LossBreakdown mean_of(const LossBreakdown& sum, std::size_t n, const LossWeights& w) {
  LossBreakdown m;
  const auto d = static_cast<double>(n);
  m.ce = sum.ce / d;
  m.giou_loss = sum.giou_loss / d;
  m.l1 = sum.l1 / d;
  m.total = w.ce * m.ce + w.giou * m.giou_loss + w.l1 * m.l1;
  return m;
}

nlohmann::json breakdown_json(const LossBreakdown& b) {
  return {{"ce", b.ce}, {"giou", b.giou_loss}, {"l1", b.l1}, {"total", b.total}};
}

}  // namespace

std::uint64_t test_split_seed(std::uint64_t data_seed) { return mix_seed(data_seed, 0x7e57); }

Datasets load_datasets(const TrainConfig& config) {
  Datasets d;
  const int size = config.model.image_size;
  d.train = config.train_data.empty()
                ? generate_dataset(config.data_seed, static_cast<std::size_t>(config.train_n), size)
                : read_dataset(config.train_data);
  d.test = config.test_data.empty()
               ? generate_dataset(test_split_seed(config.data_seed), static_cast<std::size_t>(config.test_n), size)
               : read_dataset(config.test_data);
  return d;
}

Vocabulary build_vocabulary(std::span<const VQLASample> samples) {
  std::vector<std::string> corpus;
  corpus.reserve(samples.size());
  for (const auto& s : samples) corpus.push_back(s.question);
  return Vocabulary::build(corpus);
}

Adam::Adam(ParamList params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.param->value.rows(), p.param->value.cols()));
    v_.push_back(Matrix::Zero(p.param->value.rows(), p.param->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i].param;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    if (lr_ != 0.0) {
      p.value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
    p.zero_grad();
  }
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) epochs_json.push_back(breakdown_json(e));
  nlohmann::json j{{"config", config.to_json()},
                   {"seed", seed},
                   {"epochs", epochs_json},
                   {"steps", steps},
                   {"train_metrics", train_metrics.to_json()},
                   {"wall_seconds", wall_seconds}};
  if (test_metrics) j["test_metrics"] = test_metrics->to_json();
  return j;
}

std::string RunReport::to_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(5);
  os << "epoch        ce      giou        l1     total\n";
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    os << std::setw(5) << e + 1 << std::setw(10) << epochs[e].ce << std::setw(10) << epochs[e].giou_loss
       << std::setw(10) << epochs[e].l1 << std::setw(10) << epochs[e].total << '\n';
  }
  os << "steps " << steps << "  seed " << seed << "  wall " << std::setprecision(1) << wall_seconds << "s\n";
  os << std::setprecision(4) << "train  acc " << train_metrics.accuracy << "  f " << train_metrics.macro_f << "  miou "
     << train_metrics.miou << '\n';
  if (test_metrics) {
    os << "test   acc " << test_metrics->accuracy << "  f " << test_metrics->macro_f << "  miou " << test_metrics->miou
       << '\n';
  }
  return os.str();
}

RunReport train_model(VqlaModel& model, std::span<const VQLASample> train, const TrainConfig& config,
                      std::span<const VQLASample> test, const StepHook& hook) {
  if (train.empty()) throw std::invalid_argument("train: empty training set");
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (config.learning_rate < 0) throw std::invalid_argument("train: learning_rate must be >= 0");
  const auto start = std::chrono::steady_clock::now();

  RunReport report;
  report.config = config;
  report.seed = config.seed;
  ParamList params = model.parameters();
  zero_grads(params);
  Adam opt(params, config.learning_rate, config.beta1, config.beta2, config.adam_eps);

  std::vector<std::size_t> order(train.size());
  const auto batch = static_cast<std::size_t>(config.batch_size);
  bool stop = false;
  for (int epoch = 0; epoch < config.epochs && !stop; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(config.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);
    }
    LossBreakdown epoch_sum;
    std::size_t seen = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
      const std::size_t b1 = std::min(order.size(), b0 + batch);
      const double inv = 1.0 / static_cast<double>(b1 - b0);
      LossBreakdown batch_sum;
      for (std::size_t k = b0; k < b1; ++k) {
        const VQLASample& s = train[order[k]];
        ad::Graph g;
        ForwardOutput out = model.forward(g, s.image, s.question);
        LossTerms t = loss_terms(g, out.logits, out.box, s.answer_id, s.box, config.weights);
        const double ce = t.ce.value()(0, 0), gl = t.giou_loss.value()(0, 0), l1 = t.l1.value()(0, 0);
        if (!std::isfinite(ce) || !std::isfinite(gl) || !std::isfinite(l1)) {
          std::ostringstream msg;
          msg << "non-finite loss in epoch " << epoch + 1 << ", batch " << b0 / batch << ", sample " << order[k]
              << " (ce " << ce << ", giou " << gl << ", l1 " << l1 << ")";
          throw TrainingError(msg.str());
        }
        batch_sum.ce += ce;
        batch_sum.giou_loss += gl;
        batch_sum.l1 += l1;
        g.backward(ad::scale(t.total, inv));
      }
      opt.step();
      epoch_sum.ce += batch_sum.ce;
      epoch_sum.giou_loss += batch_sum.giou_loss;
      epoch_sum.l1 += batch_sum.l1;
      seen += b1 - b0;
      if (hook) hook(opt.steps(), mean_of(batch_sum, b1 - b0, config.weights));
      if (config.max_steps > 0 && opt.steps() >= config.max_steps) {
        stop = true;
        break;
      }
    }
    report.epochs.push_back(mean_of(epoch_sum, seen, config.weights));
  }
  report.steps = opt.steps();
  report.train_metrics = evaluate(model, train);
  if (!test.empty()) report.test_metrics = evaluate(model, test);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

TrainResult train(const TrainConfig& config, const Datasets& data, const StepHook& hook) {
  config.validate();
  TrainResult r{VqlaModel(config.model, build_vocabulary(data.train)), {}};
  r.model.init(config.seed);
  r.report = train_model(r.model, data.train, config, data.test, hook);
  return r;
}

MetricsReport evaluate(VqlaModel& model, std::span<const VQLASample> samples) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  if (model.config().num_classes != kNumClasses) {
    throw std::invalid_argument("evaluate: model has " + std::to_string(model.config().num_classes) +
                                " classes, dataset has " + std::to_string(kNumClasses));
  }
  std::vector<int> preds, targets;
  std::vector<BoundingBox> pred_boxes, gt_boxes;
  for (const auto& s : samples) {
    if (s.answer_id < 0 || s.answer_id >= model.config().num_classes) {
      throw std::invalid_argument("evaluate: answer id " + std::to_string(s.answer_id) + " outside the model's classes");
    }
    const Prediction p = model.predict(s.image, s.question);
    preds.push_back(p.label);
    targets.push_back(s.answer_id);
    pred_boxes.push_back(box_to_corners(p.box));
    gt_boxes.push_back(s.box);
  }
  return compute_metrics(preds, targets, pred_boxes, gt_boxes, model.config().num_classes);
}

}  // namespace catvil
