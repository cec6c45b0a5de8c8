#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "catvil/autodiff.hpp"
#include "catvil/params.hpp"

namespace catvil {

enum class Modality { kText, kVisual };

/// Length-L sequence of d-dimensional embeddings tagged with its modality.
struct EmbeddingSequence {
  Matrix rows;
  Modality modality = Modality::kText;
};

/// Segment ids shared by the text and visual embedding tables.
inline constexpr int kTextSegment = 0;
inline constexpr int kVisualSegment = 1;

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;

  Vocabulary();

  /// First-occurrence ordering over the tokenized corpus. Throws on an empty corpus.
  static Vocabulary build(std::span<const std::string> corpus);
  static Vocabulary from_tokens(std::span<const std::string> tokens);

  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// One token per line, in id order.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Lowercases and splits on anything that is not a letter or digit.
std::vector<std::string> split_words(std::string_view text);

/// [CLS] t1..tk [SEP] [PAD]..., truncated so that the result has exactly `length` ids.
std::vector<int> tokenize(std::string_view question, const Vocabulary& vocab, int length);

/// Key-padding mask for an id sequence: 0 at [PAD] positions.
RowMask padding_mask(std::span<const int> ids);

struct TextEmbeddingTables {
  Param token;     // |V| x d
  Param segment;   // 2 x d
  Param position;  // L_max x d

  TextEmbeddingTables() = default;
  TextEmbeddingTables(int vocab_size, int max_length, int dim);

  int dim() const { return static_cast<int>(token.value.cols()); }
  int max_length() const { return static_cast<int>(position.value.rows()); }
  void init(Rng& rng, double stddev = 0.02);
  void collect(ParamList& out, const std::string& prefix);
};

/// Row i = token[ids[i]] + segment[0] + position[i].
ad::Var embed_text(ad::Graph& g, std::span<const int> ids, TextEmbeddingTables& tables);
EmbeddingSequence embed_text(std::span<const int> ids, TextEmbeddingTables& tables);

}  // namespace catvil
