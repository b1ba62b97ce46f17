#pragma once

#include "hnmt/advisor.hpp"
#include "hnmt/checkpoint.hpp"
#include "hnmt/nmt.hpp"
#include "hnmt/vocab.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>

namespace hnmt {

/// NMT parameters plus, after hybrid training starts, the classifier and gate.
struct HybridModel {
  NmtConfig nmt_config;
  std::optional<AdvisorConfig> advisor_config;
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
  ParameterSet params;
  std::uint64_t seed = 0;

  /// Registers and initializes the NMT tensors; vocab sizes override cfg.
  static HybridModel create(Vocabulary src, Vocabulary tgt, NmtConfig cfg, std::uint64_t seed);
  /// Registers the classifier and gate with fresh seeded values.
  void add_advisor(const AdvisorConfig& cfg);
  bool has_advisor() const { return advisor_config.has_value(); }

  Nmt nmt() { return Nmt(nmt_config, params); }
  Advisor advisor();

  Container to_container() const;
  static HybridModel from_container(const Container& c);
  void save(const std::filesystem::path& path) const { write_container(path, to_container()); }
  static HybridModel load(const std::filesystem::path& path) { return from_container(read_container(path)); }
};

}  // namespace hnmt
