#include "hnmt/smt_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace hnmt::smt {
namespace {

// Stand-in probability for a table entry that is absent.
constexpr double kProbFloor = 1e-12;
constexpr std::size_t kPseudoPool = 50;

double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_num(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw DataError("smt: bad number '" + s + "'");
  return v;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr const char* kDefaultStopWords[] = {
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at",
    "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could", "did",
    "do", "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has", "have",
    "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into",
    "is", "it", "its", "itself", "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of",
    "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then",
    "there", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "very", "was",
    "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would",
    "you", "your", "yours", "yourself", "yourselves", "'s", "n't", "'re", "'ve", "'ll", "'d", "'m",
    ".", ",", ";", ":", "!", "?", "\"", "'", "`", "``", "''", "(", ")", "[", "]", "{", "}", "-", "--", "...",
    "/", "\\", "&", "%", "$", "#", "@", "*", "+", "=", "<", ">", "|", "~", "^", "_"};

}  // namespace

StopList StopList::english_default() {
  std::unordered_set<std::string> w;
  for (const char* s : kDefaultStopWords) w.insert(s);
  return StopList(std::move(w));
}

StopList StopList::parse(std::string_view text) {
  std::unordered_set<std::string> w;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto toks = tokenize(line);
    if (toks.size() > 1) throw DataError("stop list: one token per line expected, got '" + line + "'");
    if (!toks.empty()) w.insert(toks[0]);
  }
  return StopList(std::move(w));
}

StopList StopList::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string StopList::serialize() const {
  std::vector<std::string> sorted(words_.begin(), words_.end());
  std::sort(sorted.begin(), sorted.end());
  std::string out;
  for (const auto& w : sorted) out += w + "\n";
  return out;
}

double reorder_cost_hard(int sp_t, int sp_prev) { return -std::abs(sp_t - sp_prev - 1); }

double reorder_cost_soft(int sp_t, std::span<const double> a_prev) {
  double total = 0.0, cost = 0.0;
  for (std::size_t j = 0; j < a_prev.size(); ++j) {
    total += a_prev[j];
    cost += a_prev[j] * std::abs(sp_t - static_cast<int>(j) - 1);
  }
  if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("reorder_cost_soft: attention does not sum to 1");
  return -cost;
}

std::size_t CoverageVector::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string CoverageVector::to_string() const {
  std::string s;
  for (auto b : bits_) s += b ? '1' : '0';
  return s;
}

std::vector<std::vector<Candidate>> build_candidate_table(const LexTables& tables, const Vocabulary& src_vocab,
                                                          const Vocabulary& tgt_vocab, const FeatureWeights& w,
                                                          std::size_t n_tm) {
  if (n_tm < 1) throw std::invalid_argument("candidate table: n_tm must be >= 1");
  std::vector<std::vector<Candidate>> out(src_vocab.size());
  for (std::size_t s = 0; s < src_vocab.size() && s < tables.fwd_trans.num_rows(); ++s) {
    const int si = static_cast<int>(s);
    auto& row = out[s];
    for (const auto& [y, p] : tables.fwd_trans.row(si)) {
      const double pb = tables.bwd_trans.get(y, si);
      const double lf = tables.fwd_lex.get(si, y);
      const double lb = tables.bwd_lex.get(y, si);
      Candidate c;
      c.word = y;
      c.rank_score = w[kFwdTrans] * p + w[kBwdTrans] * pb + w[kFwdLex] * lf + w[kBwdLex] * lb;
      c.log_probs = {safe_log(p), safe_log(pb), safe_log(lf), safe_log(lb)};
      row.push_back(c);
    }
    std::sort(row.begin(), row.end(), [&tgt_vocab](const Candidate& a, const Candidate& b) {
      if (a.rank_score != b.rank_score) return a.rank_score > b.rank_score;
      return tgt_vocab.decode(a.word) < tgt_vocab.decode(b.word);
    });
    if (row.size() > n_tm) row.resize(n_tm);
  }
  return out;
}

void SmtModel::finalize() {
  candidates = build_candidate_table(tables, source_vocab, target_vocab, weights, n_tm);
  unk_lm_ids.assign(target_vocab.size(), NGramLM::kUnk);
  full_lm_ids.assign(target_vocab.size(), NGramLM::kUnk);
  is_stop.assign(target_vocab.size(), 0);
  frequent.clear();
  for (std::size_t y = 0; y < target_vocab.size(); ++y) {
    const auto& w = target_vocab.decode(static_cast<int>(y));
    unk_lm_ids[y] = unk_lm.index(w);
    full_lm_ids[y] = full_lm.index(w);
    is_stop[y] = stop.contains(w) ? 1 : 0;
    // Vocabulary ids are assigned by descending frequency.
    if (y >= static_cast<std::size_t>(Vocabulary::kReserved) && !is_stop[y] && frequent.size() < kPseudoPool) {
      frequent.push_back(static_cast<int>(y));
    }
  }
}

SmtModel train_smt(const ParallelCorpus& corpus, const Vocabulary& nmt_target_vocab, StopList stop,
                   const SmtOptions& options) {
  corpus.validate();
  if (corpus.empty()) throw DataError("train_smt: empty corpus");
  SmtModel m;
  m.source_vocab = Vocabulary::build(corpus.source, 0);
  m.target_vocab = Vocabulary::build(corpus.target, 0);
  IdCorpus src, tgt;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    src.push_back(m.source_vocab.encode(corpus.source[i]));
    tgt.push_back(m.target_vocab.encode(corpus.target[i]));
  }
  m.tables = build_lex_tables(src, tgt, m.source_vocab.size(), m.target_vocab.size(), options.ibm_iters);
  m.unk_lm = NGramLM::train(corpus.target, options.lm, &nmt_target_vocab);
  m.full_lm = NGramLM::train(corpus.target, options.lm, nullptr);
  m.stop = std::move(stop);
  m.weights = options.weights;
  m.n_tm = options.n_tm;
  m.finalize();
  return m;
}

bool rec_before(const Recommendation& a, const Recommendation& b, const Vocabulary& tgt_vocab) {
  if (a.score != b.score) return a.score > b.score;
  if (a.src_pos != b.src_pos) return a.src_pos < b.src_pos;
  return tgt_vocab.decode(a.word) < tgt_vocab.decode(b.word);
}

std::vector<Recommendation> recommend(const SmtModel& model, std::span<const int> src, std::span<const int> prefix,
                                      std::span<const double> prev_attention, const CoverageVector& cv,
                                      std::size_t n_rec, LmKind lm_kind) {
  if (cv.size() != src.size()) throw std::invalid_argument("recommend: coverage length differs from source length");
  if (!prev_attention.empty() && prev_attention.size() != src.size()) {
    throw std::invalid_argument("recommend: attention length differs from source length");
  }
  const NGramLM& lm = model.lm(lm_kind);
  const auto lm_ids = model.lm_ids(lm_kind);
  std::vector<int> history;
  const std::size_t keep = static_cast<std::size_t>(lm.order() - 1);
  for (std::size_t i = prefix.size() > keep ? prefix.size() - keep : 0; i < prefix.size(); ++i) {
    history.push_back(lm_ids[static_cast<std::size_t>(prefix[i])]);
  }

  std::vector<Recommendation> out;
  for (std::size_t j = 0; j < src.size(); ++j) {
    if (cv.covered(j)) continue;
    const auto s = static_cast<std::size_t>(src[j]);
    if (s >= model.candidates.size()) continue;
    const double reorder = prev_attention.empty() ? 0.0 : reorder_cost_soft(static_cast<int>(j), prev_attention);
    for (const Candidate& c : model.candidates[s]) {
      if (model.is_stop[static_cast<std::size_t>(c.word)]) continue;
      Recommendation r;
      r.word = c.word;
      r.src_pos = static_cast<int>(j);
      r.features = {c.log_probs[0], c.log_probs[1], c.log_probs[2], c.log_probs[3],
                    lm.logprob(history, lm_ids[static_cast<std::size_t>(c.word)]), reorder};
      r.score = 0.0;
      for (int f = 0; f < kNumFeatures; ++f) r.score += model.weights[f] * r.features[static_cast<std::size_t>(f)];
      out.push_back(r);
    }
  }
  const auto& tv = model.target_vocab;
  auto cmp = [&tv](const Recommendation& a, const Recommendation& b) { return rec_before(a, b, tv); };
  if (out.size() > n_rec) {
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n_rec), out.end(), cmp);
    out.resize(n_rec);
  } else {
    std::sort(out.begin(), out.end(), cmp);
  }
  return out;
}

std::vector<Recommendation> pseudo_recommend(const SmtModel& model, const CoverageVector& cv, std::size_t n_rec,
                                             Rng& rng) {
  std::vector<int> open;
  for (std::size_t j = 0; j < cv.size(); ++j) {
    if (!cv.covered(j)) open.push_back(static_cast<int>(j));
  }
  std::vector<Recommendation> out;
  if (open.empty() || model.frequent.empty()) return out;
  std::vector<int> pool = model.frequent;
  const std::size_t k = std::min(n_rec, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    const auto pick = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[pick]);
    Recommendation r;
    r.word = pool[i];
    r.src_pos = open[static_cast<std::size_t>(rng.below(open.size()))];
    out.push_back(r);
  }
  return out;
}

void update_coverage(CoverageVector& cv, int emitted, std::span<const Recommendation> recs) {
  if (emitted == Vocabulary::kUnk) return;
  for (const auto& r : recs) {
    if (r.word == emitted) {
      if (r.src_pos >= 0) cv.set(static_cast<std::size_t>(r.src_pos));
      return;
    }
  }
}

Container SmtModel::to_container() const {
  Container c;
  c.meta["kind"] = "smt";
  c.meta["n_tm"] = std::to_string(n_tm);
  std::string w;
  for (double v : weights.lambda) w += (w.empty() ? "" : " ") + fmt(v);
  c.meta["weights"] = w;
  c.blobs["source_vocab"] = source_vocab.serialize();
  c.blobs["target_vocab"] = target_vocab.serialize();
  c.blobs["unk_lm"] = unk_lm.serialize();
  c.blobs["full_lm"] = full_lm.serialize();
  c.blobs["stoplist"] = stop.serialize();
  c.blobs["tables"] = serialize_tables(tables, source_vocab, target_vocab);
  return c;
}

SmtModel SmtModel::from_container(const Container& c) {
  if (c.meta_at("kind") != "smt") throw DataError("not an SMT model container");
  SmtModel m;
  m.n_tm = std::stoul(c.meta_at("n_tm"));
  std::istringstream ws(c.meta_at("weights"));
  std::string tok;
  for (std::size_t f = 0; f < m.weights.lambda.size(); ++f) {
    if (!(ws >> tok)) throw DataError("smt: truncated weights");
    m.weights.lambda[f] = parse_num(tok);
  }
  m.source_vocab = Vocabulary::deserialize(c.blob_at("source_vocab"));
  m.target_vocab = Vocabulary::deserialize(c.blob_at("target_vocab"));
  m.unk_lm = NGramLM::deserialize(c.blob_at("unk_lm"));
  m.full_lm = NGramLM::deserialize(c.blob_at("full_lm"));
  m.stop = StopList::parse(c.blob_at("stoplist"));
  m.tables = parse_tables(c.blob_at("tables"), m.source_vocab, m.target_vocab);
  m.finalize();
  return m;
}

void save_smt(const SmtModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Container c = model.to_container();
  {
    std::ofstream out(dir / "tables.tsv", std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir / "tables.tsv").string());
    out << c.blobs["tables"];
  }
  {
    std::ofstream out(dir / "stoplist.txt", std::ios::binary | std::ios::trunc);
    out << c.blobs["stoplist"];
  }
  write_container(dir / "smt.ckpt", c);
}

SmtModel load_smt(const std::filesystem::path& dir) {
  Container c = read_container(dir / "smt.ckpt");
  // The text table is authoritative when present so hand edits take effect.
  if (std::filesystem::exists(dir / "tables.tsv")) c.blobs["tables"] = read_file(dir / "tables.tsv");
  return SmtModel::from_container(c);
}

}  // namespace hnmt::smt
