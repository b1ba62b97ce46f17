#pragma once

#include "hnmt/ibm1.hpp"
#include "hnmt/vocab.hpp"

#include <string>
#include <string_view>

namespace hnmt::smt {

/// The four word-level translation features.
///
/// trans tables are relative frequencies of word pairs linked in the
/// intersection of the two directional Viterbi alignments; lex tables are
/// the IBM1 t-tables of each direction (NULL row dropped).
struct LexTables {
  TTable fwd_trans;  // p(tgt | src), rows by source id
  TTable bwd_trans;  // p(src | tgt), rows by target id
  TTable fwd_lex;    // t(tgt | src)
  TTable bwd_lex;    // t(src | tgt)
};

LexTables build_lex_tables(const IdCorpus& src, const IdCorpus& tgt, std::size_t num_src, std::size_t num_tgt,
                           int iters);

/// Sorted text rows "src\ttgt\tp_fwd\tp_bwd\tlex_fwd\tlex_bwd" over every
/// pair present in any table; absent entries print as 0.
std::string serialize_tables(const LexTables& tables, const Vocabulary& src_vocab, const Vocabulary& tgt_vocab);
LexTables parse_tables(std::string_view text, const Vocabulary& src_vocab, const Vocabulary& tgt_vocab);

}  // namespace hnmt::smt
