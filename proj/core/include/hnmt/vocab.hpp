#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hnmt {

using Sentence = std::vector<std::string>;

/// Splits on ASCII whitespace.
Sentence tokenize(std::string_view line);
std::string join(std::span<const std::string> tokens, std::string_view sep = " ");
std::string to_lower(std::string_view s);

/// Bidirectional token <-> id map with reserved ids UNK=0, BOS=1, EOS=2.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kReserved = 3;
  static constexpr std::string_view kUnkToken = "<unk>";
  static constexpr std::string_view kBosToken = "<s>";
  static constexpr std::string_view kEosToken = "</s>";

  Vocabulary();

  /// Keeps the cap - 3 most frequent tokens; ties go to the token seen first.
  /// cap == 0 means no cap. Throws on an empty corpus or 0 < cap < 4.
  static Vocabulary build(std::span<const Sentence> corpus, std::size_t cap);
  /// Ids follow the order of tokens (reserved symbols are prepended).
  static Vocabulary from_tokens(std::span<const std::string> tokens);

  int encode(std::string_view token) const;
  std::vector<int> encode(std::span<const std::string> tokens) const;
  const std::string& decode(int id) const;
  Sentence decode(std::span<const int> ids) const;

  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Fraction of running tokens that are in the vocabulary.
  double coverage(std::span<const Sentence> corpus) const;

  /// One token per line, reserved symbols excluded.
  std::string serialize() const;
  static Vocabulary deserialize(std::string_view text);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void push(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace hnmt
