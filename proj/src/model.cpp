#include "catvil/model.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <unordered_map>

#include "catvil/errors.hpp"

namespace catvil {
namespace {

constexpr char kMagic[8] = {'C', 'A', 'T', 'V', 'C', 'K', 'P', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("checkpoint truncated while reading ") + what, pos_);
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void ModelConfig::validate() const {
  attention().validate();
  if (coattn_depth < 0 || encoder_depth < 0) throw std::invalid_argument("ModelConfig: depths must be >= 0");
  if (image_size < 1 || patch_size < 1 || image_size % patch_size != 0) {
    throw std::invalid_argument("ModelConfig: patch_size must divide image_size");
  }
  if (text_length < 2) throw std::invalid_argument("ModelConfig: text_length must be >= 2");
  if (num_classes < 1) throw std::invalid_argument("ModelConfig: num_classes must be positive");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"dim", dim},
          {"heads", heads},
          {"ffn_hidden", ffn_hidden},
          {"coattn_depth", coattn_depth},
          {"encoder_depth", encoder_depth},
          {"image_size", image_size},
          {"patch_size", patch_size},
          {"text_length", text_length},
          {"num_classes", num_classes},
          {"encoder", std::string(to_string(encoder))},
          {"fusion", std::string(to_string(strategy))},
          {"gate_mode", std::string(to_string(gate_mode))}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.dim = j.at("dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ffn_hidden = j.at("ffn_hidden").get<int>();
  c.coattn_depth = j.at("coattn_depth").get<int>();
  c.encoder_depth = j.at("encoder_depth").get<int>();
  c.image_size = j.at("image_size").get<int>();
  c.patch_size = j.at("patch_size").get<int>();
  c.text_length = j.at("text_length").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.encoder = parse_encoder_kind(j.at("encoder").get<std::string>());
  c.strategy = parse_fusion_strategy(j.at("fusion").get<std::string>());
  c.gate_mode = parse_gate_mode(j.at("gate_mode").get<std::string>());
  return c;
}

VqlaModel::VqlaModel(const ModelConfig& config, Vocabulary vocab)
    : config_(config), vocab_(std::move(vocab)) {
  config_.validate();
  const AttentionConfig att = config_.attention();
  text_ = TextEmbeddingTables(vocab_.size(), config_.text_length, config_.dim);
  visual_ = VisualEmbeddingParams(config_.encoder, config_.image_size, config_.image_size, config_.patch_size,
                                  config_.dim);
  fusion_ = FusionParams(config_.strategy, config_.coattn_depth, att, config_.gate_mode);
  encoder_ = EncoderParams(EncoderConfig{config_.encoder_depth, att});
  classifier_ = ClassifierHead(config_.dim, config_.num_classes);
  box_head_ = BoxHead(config_.dim);
}

void VqlaModel::init(std::uint64_t seed) {
  seed_ = seed;
  Rng text_rng(mix_seed(seed, 1)), visual_rng(mix_seed(seed, 2)), fusion_rng(mix_seed(seed, 3)),
      encoder_rng(mix_seed(seed, 4)), head_rng(mix_seed(seed, 5));
  text_.init(text_rng);
  visual_.init(visual_rng);
  fusion_.init(fusion_rng);
  encoder_.init(encoder_rng);
  classifier_.init(head_rng);
  box_head_.init(head_rng);
}

ForwardOutput VqlaModel::forward(ad::Graph& g, const Image& image, std::string_view question) {
  if (image.height != config_.image_size || image.width != config_.image_size || image.channels != 3) {
    throw std::invalid_argument("VqlaModel: expected a " + std::to_string(config_.image_size) + "x" +
                                std::to_string(config_.image_size) + "x3 image");
  }
  const std::vector<int> ids = tokenize(question, vocab_, config_.text_length);
  const RowMask text_mask = padding_mask(ids);
  ad::Var text = embed_text(g, ids, text_);
  ad::Var visual = embed_visual(g, image, visual_);
  FusedSequence fused = fuse(g, visual, text, fusion_, {}, text_mask);
  EncodedSequence enc = encode_sequence(g, fused.rows, encoder_, fused.mask);
  return {class_logits(g, enc.cls, classifier_), localize(g, enc.cls, box_head_)};
}

Prediction VqlaModel::predict(const Image& image, std::string_view question) {
  ad::Graph g(ad::GradMode::kInference);
  ForwardOutput out = forward(g, image, question);
  Prediction p;
  p.probs = ad::softmax_rows(out.logits).value().row(0);
  p.probs.maxCoeff(&p.label);
  p.box = to_predicted_box(out.box.value());
  return p;
}

ParamList VqlaModel::parameters() {
  ParamList out;
  text_.collect(out, "text");
  visual_.collect(out, "visual");
  fusion_.collect(out, "fusion");
  encoder_.collect(out, "encoder");
  classifier_.collect(out, "classifier");
  box_head_.collect(out, "box_head");
  return out;
}

void VqlaModel::save(const std::filesystem::path& path) {
  nlohmann::json header{{"config", config_.to_json()}, {"vocab", vocab_.tokens()}, {"seed", seed_}};
  const std::string text = header.dump();
  std::string out(kMagic, sizeof kMagic);
  put_u64(out, text.size());
  out += text;
  const ParamList params = parameters();
  put_u64(out, params.size());
  for (const auto& np : params) {
    put_u64(out, np.name.size());
    out += np.name;
    const Matrix& m = np.param->value;
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(m.data()[i]));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

VqlaModel VqlaModel::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(is), {}));
  if (r.str(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) throw FormatError("not a checkpoint", 0);
  const std::uint64_t header_len = r.u64("header length");
  const std::size_t header_at = r.pos();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str(header_len, "header"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what(), header_at);
  }
  VqlaModel model(ModelConfig::from_json(header.at("config")),
                  Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>()));
  model.seed_ = header.at("seed").get<std::uint64_t>();

  std::unordered_map<std::string, Param*> by_name;
  for (const auto& np : model.parameters()) by_name.emplace(np.name, np.param);
  const std::size_t count_at = r.pos();
  const std::uint64_t count = r.u64("parameter count");
  if (count != by_name.size()) {
    throw FormatError("checkpoint has " + std::to_string(count) + " parameters, model expects " +
                      std::to_string(by_name.size()),
                      count_at);
  }
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::size_t entry_at = r.pos();
    const std::string name = r.str(r.u64("name length"), "parameter name");
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("unexpected parameter '" + name + "'", entry_at);
    Matrix& m = it->second->value;
    const std::uint64_t rows = r.u64("rows"), cols = r.u64("cols");
    if (rows != static_cast<std::uint64_t>(m.rows()) || cols != static_cast<std::uint64_t>(m.cols())) {
      throw FormatError("shape mismatch for '" + name + "'", entry_at);
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(r.u64("parameter data"));
    it->second->zero_grad();
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint", r.pos());
  return model;
}

}  // namespace catvil
