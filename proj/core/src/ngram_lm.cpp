#include "hnmt/ngram_lm.hpp"

#include "hnmt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <numeric>
#include <sstream>

namespace hnmt::smt {
namespace {

constexpr int kMaxOrder = 4;
constexpr int kMaxTokens = 0xfffe;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<double> NGramLM::default_weights(int order) {
  static const double base[kMaxOrder] = {0.5, 0.3, 0.15, 0.05};
  if (order < 1 || order > kMaxOrder) throw std::invalid_argument("ngram: order must be in [1, 4]");
  std::vector<double> w(base + (kMaxOrder - order), base + kMaxOrder);
  double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= s;
  return w;
}

void NGramLM::validate_options() const {
  if (options_.order < 1 || options_.order > kMaxOrder) throw std::invalid_argument("ngram: order must be in [1, 4]");
  if (static_cast<int>(options_.weights.size()) != options_.order) {
    throw std::invalid_argument("ngram: need one interpolation weight per order");
  }
  for (double w : options_.weights) {
    if (!(w > 0.0)) throw std::invalid_argument("ngram: interpolation weights must be positive");
  }
  if (!(options_.floor > 0.0 && options_.floor < 1.0)) throw std::invalid_argument("ngram: floor must be in (0, 1)");
}

int NGramLM::intern(const std::string& token) {
  auto [it, inserted] = index_.try_emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) {
    if (tokens_.size() >= kMaxTokens) throw DataError("ngram: vocabulary too large");
    tokens_.push_back(token);
  }
  return it->second;
}

NGramLM::Key NGramLM::pack(std::span<const int> ids) const {
  Key k = 0;
  for (int id : ids) k = (k << 16) | static_cast<Key>(id + 1);
  return k;
}

void NGramLM::count(std::span<const int> padded, std::size_t pos, int level, double c) {
  auto gram = padded.subspan(pos + 1 - static_cast<std::size_t>(level), static_cast<std::size_t>(level));
  ngram_[static_cast<std::size_t>(level - 1)][pack(gram)] += c;
  context_[static_cast<std::size_t>(level - 1)][pack(gram.first(gram.size() - 1))] += c;
}

NGramLM NGramLM::train(std::span<const Sentence> sentences, const Options& options, const Vocabulary* map_vocab) {
  NGramLM lm;
  lm.options_ = options;
  if (lm.options_.weights.empty()) lm.options_.weights = default_weights(options.order);
  lm.validate_options();
  lm.intern(std::string(Vocabulary::kUnkToken));
  lm.intern(std::string(Vocabulary::kBosToken));
  lm.ngram_.resize(static_cast<std::size_t>(options.order));
  lm.context_.resize(static_cast<std::size_t>(options.order));
  std::size_t words = 0;
  const auto pad = static_cast<std::size_t>(options.order - 1);
  std::vector<int> padded;
  for (const auto& s : sentences) {
    padded.assign(pad, kBos);
    for (const auto& tok : s) {
      bool known = !map_vocab || map_vocab->contains(tok);
      padded.push_back(known ? lm.intern(tok) : kUnk);
    }
    for (std::size_t pos = pad; pos < padded.size(); ++pos) {
      for (int k = 1; k <= options.order; ++k) lm.count(padded, pos, k, 1.0);
      ++words;
    }
  }
  if (words == 0) throw DataError("train_lm: no tokens");
  return lm;
}

int NGramLM::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> NGramLM::predictable() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    if (i != kBos) out.push_back(i);
  }
  return out;
}

double NGramLM::prob(std::span<const int> history, int word) const {
  const int order = options_.order;
  int ctx[kMaxOrder];
  const std::size_t need = static_cast<std::size_t>(order - 1);
  const std::size_t have = std::min(need, history.size());
  std::size_t fill = need - have;
  for (std::size_t i = 0; i < fill; ++i) ctx[i] = kBos;
  for (std::size_t i = 0; i < have; ++i) ctx[fill + i] = history[history.size() - have + i];
  ctx[need] = word;
  std::span<const int> full(ctx, need + 1);

  const double vocab = static_cast<double>(tokens_.size() - 1);
  double num = 0.0, wsum = 0.0;
  for (int k = order; k >= 1; --k) {
    const double lambda = options_.weights[static_cast<std::size_t>(order - k)];
    auto gram = full.subspan(full.size() - static_cast<std::size_t>(k));
    const auto& ctxmap = context_[static_cast<std::size_t>(k - 1)];
    auto c = ctxmap.find(pack(gram.first(gram.size() - 1)));
    if (c == ctxmap.end() || c->second <= 0.0) continue;
    const auto& gmap = ngram_[static_cast<std::size_t>(k - 1)];
    auto g = gmap.find(pack(gram));
    double ml = g == gmap.end() ? 0.0 : g->second / c->second;
    if (k == 1) ml = (1.0 - options_.floor) * ml + options_.floor / vocab;
    num += lambda * ml;
    wsum += lambda;
  }
  return num / wsum;
}

double NGramLM::logprob(std::span<const int> history, int word) const { return std::log(prob(history, word)); }

double NGramLM::sentence_logprob(const Sentence& s) const {
  std::vector<int> ids;
  double lp = 0.0;
  for (const auto& tok : s) {
    int id = index(tok);
    lp += logprob(ids, id);
    ids.push_back(id);
  }
  return lp;
}

double NGramLM::perplexity(std::span<const Sentence> sentences) const {
  double lp = 0.0;
  std::size_t n = 0;
  for (const auto& s : sentences) {
    lp += sentence_logprob(s);
    n += s.size();
  }
  if (n == 0) throw DataError("perplexity: no tokens");
  return std::exp(-lp / static_cast<double>(n));
}

std::string NGramLM::serialize() const {
  std::string out = "order\t" + std::to_string(options_.order) + "\nfloor\t" + fmt(options_.floor) + "\nweights";
  for (double w : options_.weights) out += "\t" + fmt(w);
  out += "\ntokens\t" + std::to_string(tokens_.size()) + "\n";
  for (const auto& t : tokens_) out += t + "\n";
  // Sorted by level then key for byte-stable output.
  for (std::size_t k = 0; k < ngram_.size(); ++k) {
    std::map<Key, double> sorted(ngram_[k].begin(), ngram_[k].end());
    out += "level\t" + std::to_string(k + 1) + "\t" + std::to_string(sorted.size()) + "\n";
    for (const auto& [key, c] : sorted) {
      std::string words;
      Key kk = key;
      std::vector<int> ids;
      for (std::size_t i = 0; i <= k; ++i) {
        ids.push_back(static_cast<int>(kk & 0xffff) - 1);
        kk >>= 16;
      }
      std::reverse(ids.begin(), ids.end());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) words += ' ';
        words += std::to_string(ids[i]);
      }
      out += words + "\t" + fmt(c) + "\n";
    }
  }
  return out;
}

NGramLM NGramLM::deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  auto fields = [&in]() {
    std::string line;
    if (!std::getline(in, line)) throw DataError("ngram: truncated model");
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    return f;
  };
  auto num = [](const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw DataError("ngram: bad number '" + s + "'");
    return v;
  };
  NGramLM lm;
  auto f = fields();
  if (f.size() != 2 || f[0] != "order") throw DataError("ngram: expected order");
  lm.options_.order = std::stoi(f[1]);
  f = fields();
  if (f.size() != 2 || f[0] != "floor") throw DataError("ngram: expected floor");
  lm.options_.floor = num(f[1]);
  f = fields();
  if (f.empty() || f[0] != "weights") throw DataError("ngram: expected weights");
  for (std::size_t i = 1; i < f.size(); ++i) lm.options_.weights.push_back(num(f[i]));
  lm.validate_options();
  f = fields();
  if (f.size() != 2 || f[0] != "tokens") throw DataError("ngram: expected tokens");
  const auto ntok = std::stoul(f[1]);
  for (std::size_t i = 0; i < ntok; ++i) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("ngram: truncated token list");
    lm.intern(line);
  }
  lm.ngram_.resize(static_cast<std::size_t>(lm.options_.order));
  lm.context_.resize(static_cast<std::size_t>(lm.options_.order));
  for (int k = 1; k <= lm.options_.order; ++k) {
    f = fields();
    if (f.size() != 3 || f[0] != "level" || std::stoi(f[1]) != k) throw DataError("ngram: expected level header");
    const auto n = std::stoul(f[2]);
    for (std::size_t i = 0; i < n; ++i) {
      f = fields();
      if (f.size() != 2) throw DataError("ngram: bad count line");
      std::istringstream ids(f[0]);
      std::vector<int> gram;
      int id;
      while (ids >> id) {
        if (id < 0 || static_cast<std::size_t>(id) >= lm.tokens_.size()) throw DataError("ngram: id out of range");
        gram.push_back(id);
      }
      if (static_cast<int>(gram.size()) != k) throw DataError("ngram: n-gram arity mismatch");
      double c = num(f[1]);
      lm.ngram_[static_cast<std::size_t>(k - 1)][lm.pack(gram)] += c;
      lm.context_[static_cast<std::size_t>(k - 1)][lm.pack(std::span<const int>(gram).first(gram.size() - 1))] += c;
    }
  }
  return lm;
}

}  // namespace hnmt::smt
