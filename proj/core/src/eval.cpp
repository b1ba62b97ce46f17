#include "hnmt/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <stdexcept>

namespace hnmt {
namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Sentence& s, std::size_t n) {
  NgramCounts c;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++c[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i), s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return c;
}

Sentence lower(const Sentence& s) {
  Sentence out;
  out.reserve(s.size());
  for (const auto& w : s) out.push_back(to_lower(w));
  return out;
}

}  // namespace

BleuReport bleu(std::span<const Sentence> candidates, std::span<const std::vector<Sentence>> references) {
  if (candidates.empty()) throw std::invalid_argument("bleu: no candidates");
  if (candidates.size() != references.size()) throw std::invalid_argument("bleu: candidate and reference counts differ");
  BleuReport r;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (references[k].empty()) throw std::invalid_argument("bleu: sentence without references");
    const Sentence cand = lower(candidates[k]);
    std::vector<Sentence> refs;
    for (const auto& ref : references[k]) refs.push_back(lower(ref));

    r.candidate_length += cand.size();
    std::size_t closest = refs.front().size();
    for (const auto& ref : refs) {
      const auto d = std::abs(static_cast<long>(ref.size()) - static_cast<long>(cand.size()));
      const auto best = std::abs(static_cast<long>(closest) - static_cast<long>(cand.size()));
      if (d < best || (d == best && ref.size() < closest)) closest = ref.size();
    }
    r.reference_length += closest;

    for (std::size_t n = 1; n <= 4; ++n) {
      const NgramCounts c = count_ngrams(cand, n);
      NgramCounts max_ref;
      for (const auto& ref : refs) {
        for (const auto& [g, cnt] : count_ngrams(ref, n)) max_ref[g] = std::max(max_ref[g], cnt);
      }
      for (const auto& [g, cnt] : c) {
        auto it = max_ref.find(g);
        r.matches[n - 1] += std::min(cnt, it == max_ref.end() ? std::size_t{0} : it->second);
        r.totals[n - 1] += cnt;
      }
    }
  }
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    r.precision[n] = r.totals[n] ? static_cast<double>(r.matches[n]) / static_cast<double>(r.totals[n]) : 0.0;
    if (r.precision[n] == 0.0) zero = true;
    else log_sum += std::log(r.precision[n]);
  }
  if (r.candidate_length == 0) {
    r.brevity_penalty = 0.0;
  } else if (r.candidate_length > r.reference_length) {
    r.brevity_penalty = 1.0;
  } else {
    r.brevity_penalty = std::exp(1.0 - static_cast<double>(r.reference_length) / static_cast<double>(r.candidate_length));
  }
  r.bleu = zero ? 0.0 : r.brevity_penalty * std::exp(log_sum / 4.0);
  return r;
}

BleuReport bleu(std::span<const Sentence> candidates, std::span<const Sentence> references) {
  std::vector<std::vector<Sentence>> refs;
  refs.reserve(references.size());
  for (const auto& s : references) refs.push_back({s});
  return bleu(candidates, refs);
}

std::string BleuReport::to_text() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "BLEU      %8.4f\n"
                "p1        %8.4f  (%zu/%zu)\n"
                "p2        %8.4f  (%zu/%zu)\n"
                "p3        %8.4f  (%zu/%zu)\n"
                "p4        %8.4f  (%zu/%zu)\n"
                "BP        %8.4f\n"
                "hyp_len   %8zu\n"
                "ref_len   %8zu\n",
                bleu, precision[0], matches[0], totals[0], precision[1], matches[1], totals[1], precision[2], matches[2],
                totals[2], precision[3], matches[3], totals[3], brevity_penalty, candidate_length, reference_length);
  return buf;
}

std::string BleuReport::to_json() const {
  nlohmann::json j = {{"bleu", bleu},
                      {"precisions", precision},
                      {"matches", matches},
                      {"totals", totals},
                      {"brevity_penalty", brevity_penalty},
                      {"candidate_length", candidate_length},
                      {"reference_length", reference_length}};
  return j.dump();
}

double token_accuracy(std::span<const Sentence> candidates, std::span<const Sentence> references) {
  if (candidates.empty()) throw std::invalid_argument("token_accuracy: empty input");
  if (candidates.size() != references.size()) throw std::invalid_argument("token_accuracy: list sizes differ");
  std::size_t hits = 0, total = 0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const std::size_t m = std::min(candidates[k].size(), references[k].size());
    for (std::size_t i = 0; i < m; ++i) hits += candidates[k][i] == references[k][i];
    total += references[k].size();
  }
  if (total == 0) throw std::invalid_argument("token_accuracy: references are empty");
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace hnmt
