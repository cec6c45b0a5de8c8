#include "catvil/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace catvil {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("config: bad value '" + value + "' for " + key);
  return out;
}

using Setter = std::function<void(TrainConfig&, const std::string& key, const std::string& value)>;

template <typename T>
Setter number(T TrainConfig::*field) {
  return [field](TrainConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<T>(k, v); };
}

template <typename T>
Setter model_number(T ModelConfig::*field) {
  return [field](TrainConfig& c, const std::string& k, const std::string& v) {
    c.model.*field = parse_number<T>(k, v);
  };
}

Setter text(std::string TrainConfig::*field) {
  return [field](TrainConfig& c, const std::string&, const std::string& v) { c.*field = v; };
}

Setter weight(double LossWeights::*field) {
  return [field](TrainConfig& c, const std::string& k, const std::string& v) {
    c.weights.*field = parse_number<double>(k, v);
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table{
      {"epochs", number(&TrainConfig::epochs)},
      {"batch_size", number(&TrainConfig::batch_size)},
      {"learning_rate", number(&TrainConfig::learning_rate)},
      {"seed", number(&TrainConfig::seed)},
      {"max_steps", number(&TrainConfig::max_steps)},
      {"seeds", number(&TrainConfig::seeds)},
      {"data_seed", number(&TrainConfig::data_seed)},
      {"train_n", number(&TrainConfig::train_n)},
      {"test_n", number(&TrainConfig::test_n)},
      {"dim", model_number(&ModelConfig::dim)},
      {"heads", model_number(&ModelConfig::heads)},
      {"ffn_hidden", model_number(&ModelConfig::ffn_hidden)},
      {"coattn_depth", model_number(&ModelConfig::coattn_depth)},
      {"encoder_depth", model_number(&ModelConfig::encoder_depth)},
      {"image_size", model_number(&ModelConfig::image_size)},
      {"patch_size", model_number(&ModelConfig::patch_size)},
      {"text_length", model_number(&ModelConfig::text_length)},
      {"encoder", [](TrainConfig& c, const std::string&, const std::string& v) { c.model.encoder = parse_encoder_kind(v); }},
      {"fusion",
       [](TrainConfig& c, const std::string&, const std::string& v) { c.model.strategy = parse_fusion_strategy(v); }},
      {"gate_mode", [](TrainConfig& c, const std::string&, const std::string& v) { c.model.gate_mode = parse_gate_mode(v); }},
      {"ce_weight", weight(&LossWeights::ce)},
      {"giou_weight", weight(&LossWeights::giou)},
      {"l1_weight", weight(&LossWeights::l1)},
      {"train_data", text(&TrainConfig::train_data)},
      {"test_data", text(&TrainConfig::test_data)},
      {"out_dir", text(&TrainConfig::out_dir)},
  };
  return table;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("config: learning_rate must be > 0");
  if (max_steps < 0) throw std::invalid_argument("config: max_steps must be >= 0");
  if (seeds < 1) throw std::invalid_argument("config: seeds must be >= 1");
  if (train_n < 1 || test_n < 1) throw std::invalid_argument("config: train_n and test_n must be >= 1");
  model.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"model", model.to_json()},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"adam", {beta1, beta2, adam_eps}},
          {"seed", seed},
          {"max_steps", max_steps},
          {"seeds", seeds},
          {"loss_weights", {{"ce", weights.ce}, {"giou", weights.giou}, {"l1", weights.l1}}},
          {"train_data", train_data},
          {"test_data", test_data},
          {"out_dir", out_dir},
          {"data_seed", data_seed},
          {"train_n", train_n},
          {"test_n", test_n}};
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "epochs = " << epochs << "\nbatch_size = " << batch_size << "\nlearning_rate = " << learning_rate
     << "\nseed = " << seed << "\nmax_steps = " << max_steps << "\nseeds = " << seeds << "\ndim = " << model.dim
     << "\nheads = " << model.heads << "\nffn_hidden = " << model.ffn_hidden
     << "\ncoattn_depth = " << model.coattn_depth << "\nencoder_depth = " << model.encoder_depth
     << "\nimage_size = " << model.image_size << "\npatch_size = " << model.patch_size
     << "\ntext_length = " << model.text_length << "\nencoder = " << to_string(model.encoder)
     << "\nfusion = " << to_string(model.strategy) << "\ngate_mode = " << to_string(model.gate_mode)
     << "\nce_weight = " << weights.ce << "\ngiou_weight = " << weights.giou << "\nl1_weight = " << weights.l1
     << "\ndata_seed = " << data_seed << "\ntrain_n = " << train_n << "\ntest_n = " << test_n << '\n';
  if (!train_data.empty()) os << "train_data = " << train_data << '\n';
  if (!test_data.empty()) os << "test_data = " << test_data << '\n';
  if (!out_dir.empty()) os << "out_dir = " << out_dir << '\n';
  return os.str();
}

TrainConfig preset_config(std::string_view name) {
  TrainConfig c;
  if (name == "desk") return c;
  if (name == "paper") {
    c.epochs = 80;
    c.batch_size = 64;
    c.learning_rate = 1e-5;
    c.model.coattn_depth = 6;
    return c;
  }
  throw std::invalid_argument("unknown preset '" + std::string(name) + "' (expected desk or paper)");
}

TrainConfig parse_config(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string preset = "desk";
  std::istringstream is{std::string(text)};
  std::string line;
  for (int line_no = 1; std::getline(is, line); ++line_no) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key == "preset") {
      preset = value;
      continue;
    }
    if (!setters().contains(key)) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  TrainConfig c = preset_config(preset);
  for (const auto& [key, value] : entries) setters().find(key)->second(c, key, value);
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace catvil
