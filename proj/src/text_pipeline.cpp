#include "catvil/text_pipeline.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

namespace catvil {

Vocabulary::Vocabulary() {
  for (const char* t : {"[PAD]", "[UNK]", "[CLS]", "[SEP]"}) add(t);
}

void Vocabulary::add(const std::string& token) {
  if (index_.contains(token)) return;
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus) {
  if (corpus.empty()) throw std::invalid_argument("Vocabulary::build: empty corpus");
  Vocabulary v;
  for (const auto& q : corpus)
    for (const auto& w : split_words(q)) v.add(w);
  return v;
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  Vocabulary v;
  if (tokens.size() < 4 || tokens[0] != "[PAD]" || tokens[1] != "[UNK]" || tokens[2] != "[CLS]" ||
      tokens[3] != "[SEP]") {
    throw std::invalid_argument("Vocabulary: token list must start with [PAD] [UNK] [CLS] [SEP]");
  }
  for (const auto& t : tokens.subspan(4)) {
    if (v.index_.contains(t)) throw std::invalid_argument("Vocabulary: duplicate token '" + t + "'");
    v.add(t);
  }
  return v;
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("Vocabulary::save: cannot open " + path.string());
  for (const auto& t : tokens_) os << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("Vocabulary::load: cannot open " + path.string());
  std::vector<std::string> tokens;
  for (std::string line; std::getline(is, line);) {
    if (!line.empty()) tokens.push_back(line);
  }
  return from_tokens(tokens);
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<int> tokenize(std::string_view question, const Vocabulary& vocab, int length) {
  if (length < 2) throw std::invalid_argument("tokenize: length must be at least 2");
  std::vector<int> ids(static_cast<std::size_t>(length), Vocabulary::kPad);
  auto words = split_words(question);
  const std::size_t keep = std::min(words.size(), static_cast<std::size_t>(length - 2));
  ids[0] = Vocabulary::kCls;
  for (std::size_t i = 0; i < keep; ++i) ids[i + 1] = vocab.id(words[i]);
  ids[keep + 1] = Vocabulary::kSep;
  return ids;
}

RowMask padding_mask(std::span<const int> ids) {
  RowMask m(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) m[i] = ids[i] != Vocabulary::kPad;
  return m;
}

TextEmbeddingTables::TextEmbeddingTables(int vocab_size, int max_length, int dim)
    : token(vocab_size, dim), segment(2, dim), position(max_length, dim) {}

void TextEmbeddingTables::init(Rng& rng, double stddev) {
  init_normal(token, stddev, rng);
  init_normal(segment, stddev, rng);
  init_normal(position, stddev, rng);
}

void TextEmbeddingTables::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".token", &token});
  out.push_back({prefix + ".segment", &segment});
  out.push_back({prefix + ".position", &position});
}

ad::Var embed_text(ad::Graph& g, std::span<const int> ids, TextEmbeddingTables& tables) {
  const auto len = static_cast<Eigen::Index>(ids.size());
  if (len > tables.max_length()) {
    throw std::invalid_argument("embed_text: sequence length " + std::to_string(len) + " exceeds position table");
  }
  for (int id : ids) {
    if (id < 0 || id >= tables.token.value.rows()) {
      throw std::out_of_range("embed_text: token id " + std::to_string(id) + " outside vocabulary");
    }
  }
  ad::Var tok = ad::gather_rows(g.param(tables.token), ids);
  ad::Var pos = ad::slice_rows(g.param(tables.position), 0, len);
  ad::Var seg = ad::slice_rows(g.param(tables.segment), kTextSegment, 1);
  return ad::add_row(ad::add(tok, pos), seg);
}

EmbeddingSequence embed_text(std::span<const int> ids, TextEmbeddingTables& tables) {
  ad::Graph g(ad::GradMode::kInference);
  return {embed_text(g, ids, tables).value(), Modality::kText};
}

}  // namespace catvil
