#include "cli.hpp"

#include "hnmt/ablation.hpp"
#include "hnmt/corpus.hpp"
#include "hnmt/decoder.hpp"
#include "hnmt/eval.hpp"
#include "hnmt/hybrid.hpp"
#include "hnmt/manifest.hpp"
#include "hnmt/selftest.hpp"
#include "hnmt/smt_model.hpp"
#include "hnmt/synthetic.hpp"
#include "hnmt/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <optional>
#include <stdexcept>

namespace hnmt::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw DataError("missing file: " + p.string());
}

void require_dir(const fs::path& p) {
  if (!fs::is_directory(p)) throw DataError("missing directory: " + p.string());
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create " + p.string() + ": " + ec.message());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

ParallelCorpus read_split(const fs::path& dir, const std::string& split) {
  const fs::path src = dir / (split + ".src"), tgt = dir / (split + ".tgt");
  require_file(src);
  require_file(tgt);
  auto c = read_parallel(src, tgt);
  c.validate();
  return c;
}

void add_split_inputs(RunManifest& m, const fs::path& dir, const std::string& split) {
  m.add_input(dir / (split + ".src"));
  m.add_input(dir / (split + ".tgt"));
}

TrainConfig resolve_config(const std::string& config_path, const std::vector<std::string>& sets) {
  TrainConfig cfg;
  if (!config_path.empty()) {
    require_file(config_path);
    cfg = TrainConfig::load(config_path);
  }
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

HybridModel load_model(const fs::path& p) {
  require_file(p);
  return HybridModel::load(p);
}

smt::SmtModel load_smt_dir(const fs::path& p) {
  require_dir(p);
  return smt::load_smt(p);
}

std::optional<double> parse_gate(const std::string& s) {
  if (s.empty() || s == "none") return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !(v >= 0.0 && v <= 1.0))
    throw std::invalid_argument("--fixed-gate expects a value in [0,1] or 'none', got '" + s + "'");
  return v;
}

struct Options {
  // gen-data
  std::string task = "lexicon";
  std::size_t n_train = 2000, n_dev = 200, n_test = 200;
  std::uint64_t seed = 1;
  std::size_t num_types = 47;
  double rare_fraction = -1.0;
  double rare_rate = 0.25;
  std::size_t min_len = 4, max_len = 10;

  // training stages
  std::string data, config, out_dir, nmt, smt, stoplist, hybrid;
  std::vector<std::string> sets;

  // translate
  std::string model, input, output, trace, fixed_gate;
  std::size_t beam = 10, n_rec = 25, decode_max_len = 0;
  bool pseudo_recs = false, no_unk_replace = false;
  std::uint64_t decode_seed = 0;

  // evaluate
  std::string hyp, json_out;
  std::vector<std::string> refs;

  // ablate
  std::string split = "test";

  // selftest
  std::size_t op_seeds = 50, hybrid_seeds = 20;
};

int gen_data(const Options& o, std::ostream& out) {
  const auto t0 = Clock::now();
  const auto task = parse_task(o.task);
  if (!task) throw std::invalid_argument("unknown task '" + o.task + "' (copy|lexicon|lexicon_rare|swap)");
  if (o.n_train == 0 || o.n_dev == 0 || o.n_test == 0) throw std::invalid_argument("split sizes must be >= 1");
  SyntheticOptions so;
  so.task = *task;
  so.num_types = o.num_types;
  so.rare_fraction = o.rare_fraction;
  so.rare_rate = o.rare_rate;
  so.min_len = o.min_len;
  so.max_len = o.max_len;
  const SyntheticLanguage lang(so, o.seed);
  const fs::path dir = o.out_dir;
  make_dir(dir);

  RunManifest m;
  m.command = "gen-data";
  m.seed = o.seed;
  m.config = {{"task", o.task},
              {"train", std::to_string(o.n_train)},
              {"dev", std::to_string(o.n_dev)},
              {"test", std::to_string(o.n_test)},
              {"num_types", std::to_string(o.num_types)},
              {"rare_fraction", std::to_string(o.rare_fraction)},
              {"rare_rate", std::to_string(o.rare_rate)},
              {"min_len", std::to_string(o.min_len)},
              {"max_len", std::to_string(o.max_len)},
              {"common_vocab_cap", std::to_string(lang.common_vocab_cap())}};
  const std::pair<const char*, std::size_t> splits[] = {{"train", o.n_train}, {"dev", o.n_dev}, {"test", o.n_test}};
  std::uint64_t stream = 1;
  for (const auto& [name, n] : splits) {
    const auto c = lang.sample(n, stream++);
    const fs::path src = dir / (std::string(name) + ".src"), tgt = dir / (std::string(name) + ".tgt");
    write_parallel(c, src, tgt);
    m.outputs.push_back(src.string());
    m.outputs.push_back(tgt.string());
    out << name << ": " << c.size() << " pairs\n";
  }
  std::string dict;
  for (const auto& [s, t] : lang.dictionary()) dict += s + "\t" + t + "\t" + (lang.is_rare_source(s) ? "rare" : "common") + "\n";
  write_text(dir / "dictionary.tsv", dict);
  m.outputs.push_back((dir / "dictionary.tsv").string());
  out << "common types: " << lang.num_common() << ", rare types: " << lang.num_rare()
      << ", common vocab cap: " << lang.common_vocab_cap() << "\n";
  m.wallclock = seconds_since(t0);
  m.write(dir / "gen-data.manifest.json");
  return kOk;
}

int train_smt_cmd(const Options& o, std::ostream& out) {
  const auto t0 = Clock::now();
  const fs::path data = o.data, dir = o.out_dir;
  const auto cfg = resolve_config(o.config, o.sets);
  const auto train = read_split(data, "train");
  RunManifest m;
  m.command = "train-smt";
  m.seed = cfg.seed;
  m.config = cfg.to_map();
  add_split_inputs(m, data, "train");

  Vocabulary nmt_tgt;
  if (!o.nmt.empty()) {
    nmt_tgt = load_model(o.nmt).tgt_vocab;
    m.add_input(o.nmt);
  } else {
    nmt_tgt = Vocabulary::build(train.target, cfg.vocab_cap);
  }
  smt::StopList stop = smt::StopList::english_default();
  if (!o.stoplist.empty()) {
    require_file(o.stoplist);
    stop = smt::StopList::load(o.stoplist);
    m.add_input(o.stoplist);
  }
  const auto model = smt::train_smt(train, nmt_tgt, std::move(stop), cfg.smt_options());
  make_dir(dir);
  smt::save_smt(model, dir);
  for (const char* f : {"tables.tsv", "stoplist.txt", "smt.ckpt"}) m.outputs.push_back((dir / f).string());
  out << "source types: " << model.source_vocab.size() << ", target types: " << model.target_vocab.size() << "\n";
  m.wallclock = seconds_since(t0);
  m.write(dir / "train-smt.manifest.json");
  return kOk;
}

// Shared tail of pretrain and train-hybrid.
void write_training_outputs(const TrainResult& r, const TrainConfig& cfg, const fs::path& dir, const std::string& ckpt,
                            RunManifest& m, std::ostream& out) {
  r.best.save(dir / ckpt);
  std::string log = "# epoch, train_nll, dev_nll, wallclock\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "# initial dev_nll %.6f\n", r.initial_dev_nll);
  log += buf;
  for (const auto& e : r.log) log += e.to_string() + "\n";
  std::snprintf(buf, sizeof buf, "# best epoch %zu, dev_nll %.6f\n", r.best_epoch, r.best_dev_nll);
  log += buf;
  write_text(dir / "train.log", log);
  write_text(dir / "config.txt", cfg.to_string());
  m.outputs.push_back((dir / ckpt).string());
  m.outputs.push_back((dir / "train.log").string());
  m.outputs.push_back((dir / "config.txt").string());
  out << "best epoch " << r.best_epoch << ", dev nll " << r.best_dev_nll << "\n";
}

EpochCallback epoch_writer(const TrainConfig& cfg, const fs::path& dir, const std::string& stem, RunManifest& m,
                           std::ostream& out) {
  return [&cfg, dir, stem, &m, &out](const EpochLog& e, const HybridModel& model) {
    out << "epoch " << e.to_string() << "\n";
    if (cfg.checkpoint_every > 0 && e.epoch % cfg.checkpoint_every == 0) {
      const fs::path p = dir / (stem + ".epoch" + std::to_string(e.epoch) + ".ckpt");
      model.save(p);
      m.outputs.push_back(p.string());
    }
  };
}

int pretrain_cmd(const Options& o, std::ostream& out) {
  const auto t0 = Clock::now();
  const fs::path data = o.data, dir = o.out_dir;
  auto cfg = resolve_config(o.config, o.sets);
  cfg.phase = "pretrain";
  const auto train = read_split(data, "train");
  const auto dev = read_split(data, "dev");
  make_dir(dir);
  RunManifest m;
  m.command = "pretrain";
  m.seed = cfg.seed;
  m.config = cfg.to_map();
  add_split_inputs(m, data, "train");
  add_split_inputs(m, data, "dev");
  const auto r = pretrain(train, dev, cfg, epoch_writer(cfg, dir, "nmt", m, out));
  write_training_outputs(r, cfg, dir, "nmt.ckpt", m, out);
  m.wallclock = seconds_since(t0);
  m.write(dir / "pretrain.manifest.json");
  return kOk;
}

int train_hybrid_cmd(const Options& o, std::ostream& out) {
  const auto t0 = Clock::now();
  const fs::path data = o.data, dir = o.out_dir;
  auto cfg = resolve_config(o.config, o.sets);
  cfg.phase = "hybrid";
  const auto train = read_split(data, "train");
  const auto dev = read_split(data, "dev");
  const auto pre = load_model(o.nmt);
  if (pre.has_advisor()) throw DataError(o.nmt + " already contains an advisor; expected a pre-trained NMT checkpoint");
  const auto smt_model = load_smt_dir(o.smt);
  make_dir(dir);
  RunManifest m;
  m.command = "train-hybrid";
  m.seed = cfg.seed;
  m.config = cfg.to_map();
  add_split_inputs(m, data, "train");
  add_split_inputs(m, data, "dev");
  m.add_input(o.nmt);
  m.add_input(fs::path(o.smt) / "smt.ckpt");
  const auto r = train_hybrid(train, dev, pre, smt_model, cfg, epoch_writer(cfg, dir, "hybrid", m, out));
  write_training_outputs(r, cfg, dir, "hybrid.ckpt", m, out);
  m.wallclock = seconds_since(t0);
  m.write(dir / "train-hybrid.manifest.json");
  return kOk;
}

DecodeOptions decode_options(const Options& o) {
  DecodeOptions d;
  d.beam = o.beam;
  d.max_len = o.decode_max_len;
  d.fixed_gate = parse_gate(o.fixed_gate);
  d.pseudo_recs = o.pseudo_recs;
  d.unk_replace = !o.no_unk_replace;
  d.n_rec = o.n_rec;
  d.seed = o.decode_seed;
  d.trace = !o.trace.empty();
  d.validate();
  return d;
}

int translate_cmd(const Options& o, std::ostream& out, std::ostream& err) {
  const auto t0 = Clock::now();
  const auto opts = decode_options(o);
  auto model = load_model(o.model);
  std::optional<smt::SmtModel> smt_model;
  if (!o.smt.empty()) smt_model = load_smt_dir(o.smt);
  if (model.has_advisor() && !smt_model) err << "note: no --smt given; decoding with the NMT component only\n";
  require_file(o.input);
  const auto sources = read_sentences(o.input);

  RunManifest m;
  m.command = "translate";
  m.seed = opts.seed;
  m.config = {{"beam", std::to_string(opts.beam)},
              {"max_len", std::to_string(opts.max_len)},
              {"fixed_gate", o.fixed_gate.empty() ? "none" : o.fixed_gate},
              {"pseudo_recs", opts.pseudo_recs ? "1" : "0"},
              {"unk_replace", opts.unk_replace ? "1" : "0"},
              {"n_rec", std::to_string(opts.n_rec)}};
  m.add_input(o.model);
  if (smt_model) m.add_input(fs::path(o.smt) / "smt.ckpt");
  m.add_input(o.input);

  const Translator tr(model, smt_model ? &*smt_model : nullptr, opts);
  const auto translations = translate_all(tr, sources);
  write_sentences(o.output, outputs_of(translations));
  m.outputs.push_back(o.output);
  std::size_t unk_left = 0, forced = 0;
  for (const auto& t : translations) {
    unk_left += t.unk_left;
    forced += t.best.forced_eos ? 1 : 0;
  }
  if (!o.trace.empty()) {
    std::string lines;
    for (const auto& t : translations) lines += trace_json(t, model, smt_model ? &*smt_model : nullptr) + "\n";
    write_text(o.trace, lines);
    m.outputs.push_back(o.trace);
  }
  out << "translated " << sources.size() << " sentences, " << unk_left << " UNK left, " << forced << " forced EOS\n";
  m.wallclock = seconds_since(t0);
  m.write(o.output + ".manifest.json");
  return kOk;
}

int evaluate_cmd(const Options& o, std::ostream& out) {
  const auto t0 = Clock::now();
  require_file(o.hyp);
  const auto hyp = read_sentences(o.hyp);
  if (hyp.empty()) throw DataError("no hypotheses in " + o.hyp);
  std::vector<std::vector<Sentence>> refsets(hyp.size());
  std::vector<Sentence> first;
  for (const auto& r : o.refs) {
    require_file(r);
    auto ref = read_sentences(r);
    if (ref.size() != hyp.size())
      throw DataError(r + " has " + std::to_string(ref.size()) + " lines, expected " + std::to_string(hyp.size()));
    if (first.empty()) first = ref;
    for (std::size_t i = 0; i < hyp.size(); ++i) refsets[i].push_back(std::move(ref[i]));
  }
  const auto report = bleu(hyp, refsets);
  const double acc = token_accuracy(hyp, first);
  out << report.to_text();
  char buf[64];
  std::snprintf(buf, sizeof buf, "token_accuracy %.4f\n", acc);
  out << buf;
  if (!o.json_out.empty()) {
    auto j = nlohmann::json::parse(report.to_json());
    j["token_accuracy"] = acc;
    write_text(o.json_out, j.dump(2) + "\n");
    RunManifest m;
    m.command = "evaluate";
    m.add_input(o.hyp);
    for (const auto& r : o.refs) m.add_input(r);
    m.outputs.push_back(o.json_out);
    m.wallclock = seconds_since(t0);
    m.write(o.json_out + ".manifest.json");
  }
  return kOk;
}

int ablate_cmd(const Options& o, std::ostream& out) {
  const auto t0 = Clock::now();
  auto opts = decode_options(o);
  auto nmt_model = load_model(o.nmt);
  auto hybrid_model = load_model(o.hybrid);
  if (!hybrid_model.has_advisor()) throw DataError(o.hybrid + " has no advisor; expected a hybrid checkpoint");
  const auto smt_model = load_smt_dir(o.smt);
  const auto test = read_split(o.data, o.split);
  const fs::path dir = o.out_dir;
  make_dir(dir);

  const auto rows = run_ablation(nmt_model, hybrid_model, smt_model, test, opts);
  const auto table = ablation_table(rows);
  out << table;
  write_text(dir / "ablation.txt", table);
  write_text(dir / "ablation.json", ablation_json(rows) + "\n");

  RunManifest m;
  m.command = "ablate";
  m.seed = opts.seed;
  m.config = {{"beam", std::to_string(opts.beam)}, {"n_rec", std::to_string(opts.n_rec)}, {"split", o.split}};
  m.add_input(o.nmt);
  m.add_input(o.hybrid);
  m.add_input(fs::path(o.smt) / "smt.ckpt");
  add_split_inputs(m, o.data, o.split);
  m.outputs = {(dir / "ablation.txt").string(), (dir / "ablation.json").string()};
  m.wallclock = seconds_since(t0);
  m.write(dir / "ablate.manifest.json");
  return kOk;
}

int selftest_cmd(const Options& o, std::ostream& out) {
  const auto entries = run_selftest(o.op_seeds, o.hybrid_seeds);
  std::size_t failed = 0;
  double worst = 0.0;
  for (const auto& e : entries) {
    worst = std::max(worst, e.report.max_rel_error);
    if (!e.report.passed) {
      ++failed;
      out << "FAIL " << e.name << ": " << ad::to_string(e.report) << "\n";
    }
  }
  out << entries.size() - failed << "/" << entries.size() << " gradient checks passed, max relative error " << worst
      << "\n";
  return failed == 0 ? kOk : kNumeric;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid NMT with SMT recommendations", "hnmt"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic parallel corpus");
  gen->add_option("--task", o.task, "copy|lexicon|lexicon_rare|swap")->capture_default_str();
  gen->add_option("--train", o.n_train, "Training pairs")->capture_default_str();
  gen->add_option("--dev", o.n_dev, "Development pairs")->capture_default_str();
  gen->add_option("--test", o.n_test, "Test pairs")->capture_default_str();
  gen->add_option("--seed", o.seed, "Language and sampling seed")->capture_default_str();
  gen->add_option("--num-types", o.num_types, "Source word types")->capture_default_str();
  gen->add_option("--rare-fraction", o.rare_fraction, "Share of rare types (negative: task default)")
      ->capture_default_str();
  gen->add_option("--rare-rate", o.rare_rate, "Probability of a rare word per sentence")->capture_default_str();
  gen->add_option("--min-len", o.min_len)->capture_default_str();
  gen->add_option("--max-len", o.max_len)->capture_default_str();
  gen->add_option("--out", o.out_dir, "Output directory")->required();

  auto add_train_opts = [&o](CLI::App* sc) {
    sc->add_option("--data", o.data, "Directory with {train,dev}.{src,tgt}")->required();
    sc->add_option("--config", o.config, "key=value configuration file");
    sc->add_option("--set", o.sets, "Override one configuration key (key=value)");
    sc->add_option("--out", o.out_dir, "Output directory")->required();
  };

  auto* tsmt = app.add_subcommand("train-smt", "Train the SMT advisor tables and language models");
  add_train_opts(tsmt);
  tsmt->add_option("--nmt", o.nmt, "NMT checkpoint whose target vocabulary maps the UNK language model");
  tsmt->add_option("--stoplist", o.stoplist, "Stop-word file, one token per line");

  auto* pre = app.add_subcommand("pretrain", "Pre-train the NMT model");
  add_train_opts(pre);

  auto* hyb = app.add_subcommand("train-hybrid", "Train the hybrid model from a pre-trained NMT model");
  add_train_opts(hyb);
  hyb->add_option("--nmt", o.nmt, "Pre-trained NMT checkpoint")->required();
  hyb->add_option("--smt", o.smt, "SMT model directory")->required();

  auto add_decode_opts = [&o](CLI::App* sc) {
    sc->add_option("--beam", o.beam)->capture_default_str();
    sc->add_option("--n-rec", o.n_rec, "Recommendations per step")->capture_default_str();
    sc->add_option("--seed", o.decode_seed, "Seed for pseudo recommendations")->capture_default_str();
    sc->add_option("--max-len", o.decode_max_len, "Output length bound including EOS (0: 2*|src|+5)")
        ->capture_default_str();
  };

  auto* tr = app.add_subcommand("translate", "Translate a tokenized source file");
  tr->add_option("--model", o.model, "NMT or hybrid checkpoint")->required();
  tr->add_option("--smt", o.smt, "SMT model directory");
  tr->add_option("--input", o.input)->required();
  tr->add_option("--output", o.output)->required();
  add_decode_opts(tr);
  tr->add_option("--fixed-gate", o.fixed_gate, "Pin the gate to a value in [0,1]");
  tr->add_flag("--pseudo-recs", o.pseudo_recs, "Replace recommendations with random frequent words");
  tr->add_flag("--no-unk-replace", o.no_unk_replace, "Keep UNK tokens in the output");
  tr->add_option("--trace", o.trace, "Write a JSON-lines search trace");

  auto* ev = app.add_subcommand("evaluate", "Corpus BLEU and token accuracy");
  ev->add_option("--hyp", o.hyp)->required();
  ev->add_option("--ref", o.refs, "Reference file (repeatable)")->required();
  ev->add_option("--json", o.json_out, "Also write the report as JSON");

  auto* ab = app.add_subcommand("ablate", "Run the six decoding configurations on a test split");
  ab->add_option("--nmt", o.nmt, "Pre-trained NMT checkpoint")->required();
  ab->add_option("--hybrid", o.hybrid, "Hybrid checkpoint")->required();
  ab->add_option("--smt", o.smt, "SMT model directory")->required();
  ab->add_option("--data", o.data, "Corpus directory")->required();
  ab->add_option("--split", o.split)->capture_default_str();
  ab->add_option("--out", o.out_dir)->required();
  add_decode_opts(ab);

  auto* st = app.add_subcommand("selftest", "Finite-difference gradient checks");
  st->add_option("--seeds", o.op_seeds, "Seeds per graph operation")->capture_default_str();
  st->add_option("--hybrid-seeds", o.hybrid_seeds, "Seeds for the full hybrid loss")->capture_default_str();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name());
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (gen->parsed()) return gen_data(o, out);
    if (tsmt->parsed()) return train_smt_cmd(o, out);
    if (pre->parsed()) return pretrain_cmd(o, out);
    if (hyb->parsed()) return train_hybrid_cmd(o, out);
    if (tr->parsed()) return translate_cmd(o, out, err);
    if (ev->parsed()) return evaluate_cmd(o, out);
    if (ab->parsed()) return ablate_cmd(o, out);
    if (st->parsed()) return selftest_cmd(o, out);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  err << "error: no subcommand\n";
  return kUsage;
}

}  // namespace hnmt::cli
