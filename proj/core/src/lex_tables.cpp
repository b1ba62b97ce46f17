#include "hnmt/lex_tables.hpp"

#include "hnmt/tensor.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

namespace hnmt::smt {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw DataError("tables: bad number '" + s + "'");
  return v;
}

}  // namespace

LexTables build_lex_tables(const IdCorpus& src, const IdCorpus& tgt, std::size_t num_src, std::size_t num_tgt,
                           int iters) {
  Ibm1Model s2t = train_ibm1(src, tgt, num_src, iters);
  Ibm1Model t2s = train_ibm1(tgt, src, num_tgt, iters);

  LexTables out;
  out.fwd_lex = s2t.table;
  out.fwd_lex.resize(num_src);
  out.bwd_lex = t2s.table;
  out.bwd_lex.resize(num_tgt);

  std::map<std::pair<int, int>, double> links;
  for (std::size_t s = 0; s < src.size(); ++s) {
    auto fwd = viterbi_align(s2t, src[s], tgt[s]);  // per target position
    auto bwd = viterbi_align(t2s, tgt[s], src[s]);  // per source position
    for (std::size_t j = 0; j < fwd.size(); ++j) {
      int i = fwd[j];
      if (i >= 0 && bwd[static_cast<std::size_t>(i)] == static_cast<int>(j)) {
        links[{src[s][static_cast<std::size_t>(i)], tgt[s][j]}] += 1.0;
      }
    }
  }
  std::vector<double> src_tot(num_src, 0.0), tgt_tot(num_tgt, 0.0);
  for (const auto& [pair, c] : links) {
    src_tot[static_cast<std::size_t>(pair.first)] += c;
    tgt_tot[static_cast<std::size_t>(pair.second)] += c;
  }
  out.fwd_trans = TTable(num_src);
  out.bwd_trans = TTable(num_tgt);
  for (const auto& [pair, c] : links) {
    out.fwd_trans.set(pair.first, pair.second, c / src_tot[static_cast<std::size_t>(pair.first)]);
    out.bwd_trans.set(pair.second, pair.first, c / tgt_tot[static_cast<std::size_t>(pair.second)]);
  }
  return out;
}

std::string serialize_tables(const LexTables& t, const Vocabulary& src_vocab, const Vocabulary& tgt_vocab) {
  std::set<std::pair<int, int>> pairs;
  for (std::size_t s = 0; s < t.fwd_trans.num_rows(); ++s)
    for (const auto& [y, p] : t.fwd_trans.row(static_cast<int>(s))) pairs.insert({static_cast<int>(s), y});
  for (std::size_t s = 0; s < t.fwd_lex.num_rows(); ++s)
    for (const auto& [y, p] : t.fwd_lex.row(static_cast<int>(s))) pairs.insert({static_cast<int>(s), y});
  for (std::size_t y = 0; y < t.bwd_lex.num_rows(); ++y)
    for (const auto& [s, p] : t.bwd_lex.row(static_cast<int>(y))) pairs.insert({s, static_cast<int>(y)});

  std::map<std::pair<std::string, std::string>, std::pair<int, int>> ids;
  for (auto [s, y] : pairs) ids[{src_vocab.decode(s), tgt_vocab.decode(y)}] = {s, y};
  std::string out;
  for (const auto& [words, id] : ids) {
    auto [s, y] = id;
    out += words.first + '\t' + words.second + '\t' + fmt(t.fwd_trans.get(s, y)) + '\t' +
           fmt(t.bwd_trans.get(y, s)) + '\t' + fmt(t.fwd_lex.get(s, y)) + '\t' + fmt(t.bwd_lex.get(y, s)) + '\n';
  }
  return out;
}

LexTables parse_tables(std::string_view text, const Vocabulary& src_vocab, const Vocabulary& tgt_vocab) {
  LexTables t;
  t.fwd_trans = TTable(src_vocab.size());
  t.fwd_lex = TTable(src_vocab.size());
  t.bwd_trans = TTable(tgt_vocab.size());
  t.bwd_lex = TTable(tgt_vocab.size());
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 6) throw DataError("tables: line " + std::to_string(lineno) + " needs 6 fields");
    if (!src_vocab.contains(f[0]) || !tgt_vocab.contains(f[1])) {
      throw DataError("tables: line " + std::to_string(lineno) + " has an unknown word");
    }
    int s = src_vocab.encode(f[0]);
    int y = tgt_vocab.encode(f[1]);
    double v[4];
    for (int k = 0; k < 4; ++k) v[k] = parse_double(f[static_cast<std::size_t>(k) + 2]);
    if (v[0] > 0) t.fwd_trans.set(s, y, v[0]);
    if (v[1] > 0) t.bwd_trans.set(y, s, v[1]);
    if (v[2] > 0) t.fwd_lex.set(s, y, v[2]);
    if (v[3] > 0) t.bwd_lex.set(y, s, v[3]);
  }
  return t;
}

}  // namespace hnmt::smt
