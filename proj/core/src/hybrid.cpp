#include "hnmt/hybrid.hpp"

#include "hnmt/rng.hpp"

namespace hnmt {

namespace {
// Independent PRNG streams derived from the model seed.
constexpr std::uint64_t kNmtInitStream = 1;
constexpr std::uint64_t kAdvisorInitStream = 11;
}  // namespace

HybridModel HybridModel::create(Vocabulary src, Vocabulary tgt, NmtConfig cfg, std::uint64_t seed) {
  HybridModel m;
  cfg.src_vocab = static_cast<Index>(src.size());
  cfg.tgt_vocab = static_cast<Index>(tgt.size());
  m.nmt_config = cfg;
  m.src_vocab = std::move(src);
  m.tgt_vocab = std::move(tgt);
  m.seed = seed;
  register_nmt_params(m.params, cfg);
  Rng rng = Rng::derive(seed, kNmtInitStream);
  m.params.init_uniform(rng, cfg.init_scale);
  return m;
}

void HybridModel::add_advisor(const AdvisorConfig& cfg) {
  if (advisor_config) throw std::logic_error("model already has an advisor");
  ParameterSet fresh;
  register_advisor_params(fresh, cfg, nmt_config);
  Rng rng = Rng::derive(seed, kAdvisorInitStream);
  fresh.init_uniform(rng, nmt_config.init_scale);
  for (const auto& p : fresh) params.add(p->name, p->value.rows(), p->value.cols()).value = p->value;
  advisor_config = cfg;
}

Advisor HybridModel::advisor() {
  if (!advisor_config) throw std::logic_error("model has no advisor; run hybrid training first");
  return Advisor(*advisor_config, nmt_config, params);
}

Container HybridModel::to_container() const {
  Container c;
  c.meta = nmt_config.to_meta();
  c.meta["kind"] = advisor_config ? "hybrid" : "nmt";
  c.meta["seed"] = std::to_string(seed);
  if (advisor_config) c.meta.merge(advisor_config->to_meta());
  c.blobs["src_vocab"] = src_vocab.serialize();
  c.blobs["tgt_vocab"] = tgt_vocab.serialize();
  c.put_parameters(params);
  return c;
}

HybridModel HybridModel::from_container(const Container& c) {
  const std::string& kind = c.meta_at("kind");
  if (kind != "nmt" && kind != "hybrid") throw DataError("checkpoint kind '" + kind + "' is not a translation model");
  HybridModel m;
  m.nmt_config = NmtConfig::from_meta(c.meta);
  m.seed = std::stoull(c.meta_at("seed"));
  m.src_vocab = Vocabulary::deserialize(c.blob_at("src_vocab"));
  m.tgt_vocab = Vocabulary::deserialize(c.blob_at("tgt_vocab"));
  if (static_cast<Index>(m.src_vocab.size()) != m.nmt_config.src_vocab ||
      static_cast<Index>(m.tgt_vocab.size()) != m.nmt_config.tgt_vocab) {
    throw DataError("checkpoint vocabulary sizes disagree with its config");
  }
  register_nmt_params(m.params, m.nmt_config);
  if (kind == "hybrid") {
    m.advisor_config = AdvisorConfig::from_meta(c.meta);
    register_advisor_params(m.params, *m.advisor_config, m.nmt_config);
  }
  c.get_parameters(m.params);
  return m;
}

}  // namespace hnmt
