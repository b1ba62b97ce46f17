#include "hnmt/ablation.hpp"

#include <json.hpp>

#include <cstdio>

namespace hnmt {

std::vector<Translation> translate_all(const Translator& tr, std::span<const Sentence> sources) {
  std::vector<Translation> out;
  out.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) out.push_back(tr.translate(sources[i], i));
  return out;
}

std::vector<Sentence> outputs_of(std::span<const Translation> translations) {
  std::vector<Sentence> out;
  out.reserve(translations.size());
  for (const auto& t : translations) out.push_back(t.output);
  return out;
}

std::vector<AblationRow> run_ablation(HybridModel& nmt, HybridModel& hybrid, const smt::SmtModel& smt,
                                      const ParallelCorpus& test, const DecodeOptions& base) {
  struct Setup {
    const char* name;
    HybridModel* model;
    std::optional<double> gate;
    bool pseudo;
    bool replace;
  };
  const Setup setups[] = {
      {"baseline", &nmt, std::nullopt, false, false},    {"+SMT rec", &hybrid, std::nullopt, false, false},
      {"alpha=0", &hybrid, 0.0, false, false},           {"alpha=0.20", &hybrid, 0.20, false, false},
      {"pseudo recs", &hybrid, std::nullopt, true, false}, {"+UNK replace", &hybrid, std::nullopt, false, true},
  };
  std::vector<AblationRow> rows;
  for (const auto& s : setups) {
    DecodeOptions o = base;
    o.fixed_gate = s.gate;
    o.pseudo_recs = s.pseudo;
    o.unk_replace = s.replace;
    Translator tr(*s.model, &smt, o);
    auto translations = translate_all(tr, test.source);
    AblationRow row;
    row.name = s.name;
    row.outputs = outputs_of(translations);
    for (const auto& t : translations) row.unk_left += t.unk_left;
    row.bleu = bleu(row.outputs, test.target);
    row.token_accuracy = token_accuracy(row.outputs, test.target);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table(std::span<const AblationRow> rows) {
  std::string out = "config          BLEU     token_acc  unk_left\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-14s  %7.4f  %9.4f  %8zu\n", r.name.c_str(), r.bleu.bleu, r.token_accuracy, r.unk_left);
    out += buf;
  }
  return out;
}

std::string ablation_json(std::span<const AblationRow> rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"config", r.name},
                 {"bleu", r.bleu.bleu},
                 {"token_accuracy", r.token_accuracy},
                 {"unk_left", r.unk_left},
                 {"report", nlohmann::json::parse(r.bleu.to_json())}});
  }
  return j.dump(2);
}

}  // namespace hnmt
