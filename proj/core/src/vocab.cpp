#include "hnmt/vocab.hpp"

#include "hnmt/tensor.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>

namespace hnmt {

Sentence tokenize(std::string_view line) {
  Sentence out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(std::span<const std::string> tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Vocabulary::Vocabulary() {
  push(std::string(kUnkToken));
  push(std::string(kBosToken));
  push(std::string(kEosToken));
}

void Vocabulary::push(std::string token) {
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(std::span<const Sentence> corpus, std::size_t cap) {
  if (cap != 0 && cap < 4) throw std::invalid_argument("build_vocab: cap must be >= 4");
  struct Entry {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Entry> freq;
  std::vector<std::string> order;
  std::size_t running = 0;
  for (const auto& s : corpus) {
    for (const auto& tok : s) {
      auto [it, inserted] = freq.try_emplace(tok, Entry{0, order.size()});
      if (inserted) order.push_back(tok);
      ++it->second.count;
      ++running;
    }
  }
  if (running == 0) throw DataError("build_vocab: empty corpus");
  std::vector<std::string> keep;
  for (const auto& tok : order) {
    if (tok == kUnkToken || tok == kBosToken || tok == kEosToken) continue;
    keep.push_back(tok);
  }
  std::stable_sort(keep.begin(), keep.end(),
                   [&freq](const std::string& a, const std::string& b) { return freq[a].count > freq[b].count; });
  if (cap != 0 && keep.size() > cap - kReserved) keep.resize(cap - kReserved);
  Vocabulary v;
  for (auto& tok : keep) v.push(std::move(tok));
  return v;
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  Vocabulary v;
  for (const auto& t : tokens) {
    if (v.contains(t)) throw DataError("vocabulary: duplicate token '" + t + "'");
    v.push(t);
  }
  return v;
}

int Vocabulary::encode(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(encode(t));
  return out;
}

const std::string& Vocabulary::decode(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Sentence Vocabulary::decode(std::span<const int> ids) const {
  Sentence out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(decode(id));
  return out;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

double Vocabulary::coverage(std::span<const Sentence> corpus) const {
  std::size_t total = 0, known = 0;
  for (const auto& s : corpus) {
    for (const auto& t : s) {
      ++total;
      if (contains(t)) ++known;
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(known) / static_cast<double>(total);
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (std::size_t i = kReserved; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::deserialize(std::string_view text) {
  std::vector<std::string> toks;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) toks.push_back(line);
  }
  return from_tokens(toks);
}

}  // namespace hnmt
