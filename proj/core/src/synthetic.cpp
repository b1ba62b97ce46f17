#include "hnmt/synthetic.hpp"

#include "hnmt/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hnmt {
namespace {

constexpr double kPreferredMass = 0.7;
constexpr std::size_t kSuccessors = 3;

}  // namespace

std::optional<SyntheticTask> parse_task(std::string_view name) {
  if (name == "copy") return SyntheticTask::kCopy;
  if (name == "lexicon") return SyntheticTask::kLexicon;
  if (name == "lexicon_rare") return SyntheticTask::kLexiconRare;
  if (name == "swap") return SyntheticTask::kSwap;
  return std::nullopt;
}

std::string_view task_name(SyntheticTask task) {
  switch (task) {
    case SyntheticTask::kCopy: return "copy";
    case SyntheticTask::kLexicon: return "lexicon";
    case SyntheticTask::kLexiconRare: return "lexicon_rare";
    case SyntheticTask::kSwap: return "swap";
  }
  return "?";
}

SyntheticLanguage::SyntheticLanguage(const SyntheticOptions& options, std::uint64_t seed) : options_(options), seed_(seed) {
  if (options.num_types < 2) throw std::invalid_argument("synthetic: need at least 2 word types");
  if (options.min_len < 1 || options.max_len < options.min_len) {
    throw std::invalid_argument("synthetic: bad sentence length range");
  }
  double frac = options.rare_fraction;
  if (frac < 0.0) frac = options.task == SyntheticTask::kLexiconRare ? 0.1 : 0.0;
  options_.rare_fraction = frac;
  auto n_rare = static_cast<std::size_t>(std::llround(frac * static_cast<double>(options.num_types)));
  if (frac > 0.0 && n_rare == 0) n_rare = 1;
  if (n_rare >= options.num_types) throw std::invalid_argument("synthetic: rare fraction leaves no common types");
  const std::size_t n_common = options.num_types - n_rare;

  Rng rng = Rng::derive(seed, 0x1a2b);
  for (std::size_t i = 0; i < n_common; ++i) common_.push_back("s" + std::to_string(i));
  for (std::size_t i = 0; i < n_rare; ++i) rare_.push_back("rs" + std::to_string(i));

  std::vector<std::size_t> perm(n_common);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  for (std::size_t i = 0; i < n_common; ++i) {
    dictionary_[common_[i]] =
        options.task == SyntheticTask::kCopy ? common_[i] : "t" + std::to_string(perm[i]);
  }
  std::vector<std::size_t> rperm(n_rare);
  std::iota(rperm.begin(), rperm.end(), 0);
  rng.shuffle(rperm);
  for (std::size_t i = 0; i < n_rare; ++i) {
    dictionary_[rare_[i]] = options.task == SyntheticTask::kCopy ? rare_[i] : "rt" + std::to_string(rperm[i]);
  }

  // Each successor slot is a permutation, so every type is some type's k-th
  // successor exactly once.
  successors_.assign(n_common, {});
  for (std::size_t k = 0; k < kSuccessors; ++k) {
    std::vector<std::size_t> p(n_common);
    std::iota(p.begin(), p.end(), 0);
    rng.shuffle(p);
    for (std::size_t i = 0; i < n_common; ++i) successors_[i].push_back(p[i]);
  }
}

bool SyntheticLanguage::is_rare_source(std::string_view word) const {
  return std::find(rare_.begin(), rare_.end(), word) != rare_.end();
}

ParallelCorpus SyntheticLanguage::sample(std::size_t n, std::uint64_t seed) const {
  if (n < 1) throw std::invalid_argument("synthetic: n must be >= 1");
  Rng rng = Rng::derive(seed_ * 0x9e3779b97f4a7c15ULL + seed, 0x5eed);
  ParallelCorpus out;
  const std::size_t span = options_.max_len - options_.min_len + 1;
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t len = options_.min_len + rng.below(span);
    Sentence src;
    std::size_t cur = rng.below(common_.size());
    src.push_back(common_[cur]);
    while (src.size() < len) {
      if (rng.uniform() < kPreferredMass) {
        cur = successors_[cur][rng.below(kSuccessors)];
      } else {
        cur = rng.below(common_.size());
      }
      src.push_back(common_[cur]);
    }
    if (!rare_.empty() && rng.uniform() < options_.rare_rate) {
      src[rng.below(src.size())] = rare_[rng.below(rare_.size())];
    }
    Sentence tgt = apply_task(options_.task, src, dictionary_);
    out.add(std::move(src), std::move(tgt));
  }
  return out;
}

Sentence apply_task(SyntheticTask task, const Sentence& source, const std::map<std::string, std::string>& dictionary) {
  Sentence out;
  out.reserve(source.size());
  for (const auto& w : source) {
    if (task == SyntheticTask::kCopy) {
      out.push_back(w);
      continue;
    }
    auto it = dictionary.find(w);
    if (it == dictionary.end()) throw DataError("synthetic: no dictionary entry for '" + w + "'");
    out.push_back(it->second);
  }
  if (task == SyntheticTask::kSwap) {
    for (std::size_t i = 0; i + 1 < out.size(); i += 2) std::swap(out[i], out[i + 1]);
  }
  return out;
}

ParallelCorpus gen_synthetic(SyntheticTask task, std::size_t n, std::uint64_t seed) {
  SyntheticOptions opts;
  opts.task = task;
  return SyntheticLanguage(opts, seed).sample(n, seed);
}

}  // namespace hnmt
