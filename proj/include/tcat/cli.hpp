#pragma once

// Command-line surface: train / compress / translate / evaluate /
// sweep-gamma / ablate-quality / synthesize-noise. Flag values override
// config-file values, which override defaults. Exit codes: 0 ok, 2 config
// error, 3 data error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tcat/harness.hpp"

namespace tcat::cli {

namespace cli_detail {

// Everything funnels through the config key/value path so flags and file
// entries share one parser and one precedence rule.
struct KvCollector {
  std::map<std::string, std::string> kv;
  std::string config_path;

  void add(CLI::App* cmd, const std::string& flag, const std::string& key,
           const std::string& desc) {
    cmd->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { kv[key] = v; }, desc);
  }

  void add_config(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key = value with [sections])");
  }

  void add_train_options(CLI::App* cmd) {
    add_config(cmd);
    add(cmd, "--task", "run.task", "translate | compress | span | choice");
    add(cmd, "--manner", "run.manner", "none | etc-pipeline | etc-joint | itc-joint");
    add(cmd, "--fusion", "run.fusion", "none | bef | bdf | bbf");
    add(cmd, "--setting", "run.setting", "supervised | unsupervised | semi");
    add(cmd, "--comp-source", "run.comp_source", "trained | alltext | f8w | randsample");
    cmd->add_option_function<std::string>(
           "--seed", [this](const std::string& v) { kv["run.seed"] = v; }, "run seed")
        ->envname("TCAT_SEED");
    add(cmd, "--shared-encoder", "run.shared_encoder",
        "true: pipeline re-encodes with the task encoder");
    add(cmd, "--joint-comp-weight", "run.joint_comp_weight",
        "auxiliary compression loss weight for etc-joint");
    add(cmd, "--gamma", "beam.gamma", "compression ratio in (0,1]");
    add(cmd, "--alpha", "beam.alpha", "length normalization strength");
    add(cmd, "--beta", "beam.beta", "coverage penalty strength");
    add(cmd, "--beam", "beam.beam_size", "beam size");
    add(cmd, "--itc-gamma", "itc.gamma", "implicit compression ratio");
    add(cmd, "--steps", "train.steps", "task training steps");
    add(cmd, "--comp-steps", "train.comp_steps", "compressor / stage-1 steps");
    add(cmd, "--batch", "train.batch", "batch size");
    add(cmd, "--lr", "train.lr", "Adam learning rate");
    add(cmd, "--warmup", "train.warmup", "linear learning-rate warmup steps");
    add(cmd, "--log-every", "train.log_every", "loss log interval");
    add(cmd, "--checkpoint-every", "train.checkpoint_every", "checkpoint interval (0: end only)");
    add(cmd, "--layers", "model.layers", "encoder/decoder layers");
    add(cmd, "--d-model", "model.d_model", "model width");
    add(cmd, "--d-ff", "model.d_ff", "FFN width");
    add(cmd, "--heads", "model.heads", "attention heads");
    add(cmd, "--max-len", "model.max_len", "maximum sequence length");
    add(cmd, "--dropout", "model.dropout", "dropout rate (default 0)");
    add(cmd, "--noise-additive", "noise.additive_fraction", "additive sampling fraction");
    add(cmd, "--noise-dropout", "noise.dropout_p", "word dropout probability");
    add(cmd, "--noise-shuffle", "noise.shuffle_level", "token | sentence");
    add(cmd, "--train", "data.train", "training data file");
    add(cmd, "--dev", "data.dev", "dev data file");
    add(cmd, "--test", "data.test", "test data file");
    add(cmd, "--comp-pairs", "data.comp_pairs", "labeled compression pairs");
    add(cmd, "--corpus", "data.corpus", "unlabeled corpus for noise synthesis");
    add(cmd, "--vocab", "data.vocab", "vocabulary file");
    add(cmd, "--out", "data.out", "output directory");
    add(cmd, "--resume", "data.resume", "checkpoint to resume from");
  }

  RunConfig build() const {
    RunConfig cfg;
    if (!config_path.empty()) load_config_file(cfg, config_path);
    for (const auto& [k, v] : kv) apply_config_kv(cfg, k, v);
    return cfg;
  }
};

inline std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(harness_detail::to_double("list", item));
  }
  return out;
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (double d : parse_double_list(text)) out.push_back(static_cast<std::uint64_t>(d));
  return out;
}

// Rebuilds the models of a finished run from its output directory.
struct LoadedRun {
  RunConfig cfg;
  Vocab vocab;
  std::unique_ptr<Seq2Seq> task;
  std::unique_ptr<EncoderClassifier> clf;
  std::unique_ptr<Seq2Seq> comp;
  std::unique_ptr<ItcModule> itc;
};

inline LoadedRun load_run_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  LoadedRun lr;
  load_config_file(lr.cfg, (fs::path(dir) / "config_snapshot.cfg").string());
  lr.vocab = Vocab::load((fs::path(dir) / "vocab.txt").string());
  lr.cfg.model.vocab_size = lr.vocab.size();
  lr.cfg.comp_model.vocab_size = lr.vocab.size();
  lr.cfg.nat_model.vocab_size = lr.vocab.size();
  Rng rng(lr.cfg.seed);
  NamedParams all;
  if (task_is_encoder_decoder(lr.cfg.task)) {
    bool independent = lr.cfg.manner == Manner::etc_pipeline && !lr.cfg.shared_encoder;
    lr.task = std::make_unique<Seq2Seq>(lr.cfg.model, lr.cfg.fusion, rng, independent);
    NamedParams p = lr.task->named_params("task");
    all.insert(all.end(), p.begin(), p.end());
  } else {
    lr.clf = std::make_unique<EncoderClassifier>(lr.cfg.model, lr.cfg.fusion, rng);
    NamedParams p = lr.clf->named_params("task");
    all.insert(all.end(), p.begin(), p.end());
  }
  if (lr.cfg.manner == Manner::etc_pipeline || lr.cfg.manner == Manner::etc_joint) {
    Rng crng = rng.split(0xc0);
    lr.comp = std::make_unique<Seq2Seq>(lr.cfg.comp_model, FusionMode::none, crng);
    NamedParams p = lr.comp->named_params("comp");
    all.insert(all.end(), p.begin(), p.end());
  }
  if (lr.cfg.manner == Manner::itc_joint) {
    ItcConfig ic;
    ic.gamma = lr.cfg.itc_gamma;
    ic.nat = lr.cfg.nat_model;
    ic.nat.vocab_size = lr.vocab.size();
    ic.in_width = lr.cfg.model.d_model;
    ic.out_width = lr.cfg.model.d_model;
    Rng irng = rng.split(0x17c);
    lr.itc = std::make_unique<ItcModule>(ic, irng);
    NamedParams p = lr.itc->named_params("itc");
    all.insert(all.end(), p.begin(), p.end());
  }
  Checkpoint ck = read_checkpoint((fs::path(dir) / "checkpoint.tckp").string());
  checkpoint_load_params(ck, all);
  return lr;
}

inline std::vector<int> encode_line(const Vocab& v, const std::string& line,
                                    std::size_t max_len) {
  std::vector<int> ids = v.encode(tokenize(lowercase(line)));
  if (ids.size() + 2 > max_len) ids.resize(max_len - 2);
  return ids;
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// subcommand bodies

inline int cmd_train(const cli_detail::KvCollector& opts) {
  RunConfig cfg = opts.build();
  cfg.validate();
  TaskData data = load_task_data(cfg);
  Run run(cfg, std::move(data));
  TrainResult res = run.train();
  std::cout << "final " << res.metric_name << " = " << res.metric << "\n";
  if (!cfg.out_dir.empty()) std::cout << "artifacts written to " << cfg.out_dir << "\n";
  return 0;
}

inline int cmd_compress(const std::string& run_dir, const std::string& mode,
                        const std::string& in_path, const std::string& out_path,
                        const cli_detail::KvCollector& opts, std::uint64_t seed) {
  std::vector<std::string> lines = read_lines(in_path);
  std::vector<std::string> out_lines;
  if (mode == "etc") {
    if (run_dir.empty()) throw ConfigError("compress: --run required for mode etc");
    cli_detail::LoadedRun lr = cli_detail::load_run_dir(run_dir);
    Seq2Seq* comp = lr.comp ? lr.comp.get()
                            : (lr.cfg.task == TaskKind::compress ? lr.task.get() : nullptr);
    if (!comp) throw ConfigError("compress: run has no explicit compression model");
    BeamConfig beam = lr.cfg.beam;
    auto it = opts.kv.end();
    if ((it = opts.kv.find("beam.gamma")) != opts.kv.end())
      beam.gamma = harness_detail::to_double("beam.gamma", it->second);
    if ((it = opts.kv.find("beam.alpha")) != opts.kv.end())
      beam.alpha = harness_detail::to_double("beam.alpha", it->second);
    if ((it = opts.kv.find("beam.beta")) != opts.kv.end())
      beam.beta = harness_detail::to_double("beam.beta", it->second);
    if ((it = opts.kv.find("beam.beam_size")) != opts.kv.end())
      beam.beam_size = harness_detail::to_size("beam.beam_size", it->second);
    beam.validate();
    for (const std::string& line : lines) {
      if (line.empty()) {
        out_lines.emplace_back();
        continue;
      }
      std::vector<int> ids = cli_detail::encode_line(lr.vocab, line, comp->config().max_len);
      std::vector<int> xc = beam_search_compress(ids, *comp, beam);
      out_lines.push_back(detokenize(lr.vocab.decode(xc)));
    }
  } else {
    BaselineMode bm = parse_baseline(mode);
    double gamma = 0.6;
    auto it = opts.kv.find("beam.gamma");
    if (it != opts.kv.end()) gamma = harness_detail::to_double("beam.gamma", it->second);
    Rng rng(seed);
    for (const std::string& line : lines) {
      if (line.empty()) {
        out_lines.emplace_back();
        continue;
      }
      std::vector<std::string> toks = tokenize(lowercase(line));
      std::vector<int> ids(toks.size());
      for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
      std::vector<int> keep = baseline_compress(ids, bm, gamma, rng);
      std::vector<std::string> kept;
      for (int i : keep) kept.push_back(toks[static_cast<std::size_t>(i)]);
      out_lines.push_back(detokenize(kept));
    }
  }
  if (out_path.empty())
    for (const auto& l : out_lines) std::cout << l << "\n";
  else
    write_lines(out_path, out_lines);
  return 0;
}

inline int cmd_translate(const std::string& run_dir, const std::string& in_path,
                         const std::string& out_path, std::size_t max_steps) {
  cli_detail::LoadedRun lr = cli_detail::load_run_dir(run_dir);
  if (!lr.task || !task_is_encoder_decoder(lr.cfg.task))
    throw ConfigError("translate: run directory does not hold an encoder-decoder task");
  std::vector<std::string> out_lines;
  for (const std::string& line : read_lines(in_path)) {
    if (line.empty()) {
      out_lines.emplace_back();
      continue;
    }
    std::vector<int> src = cli_detail::encode_line(lr.vocab, line, lr.cfg.model.max_len);
    NoGradGuard ng;
    CompressedRep rep;
    const CompressedRep* rp = nullptr;
    EncoderState enc = lr.task->encode(src);
    switch (lr.cfg.manner) {
      case Manner::none: break;
      case Manner::etc_pipeline: {
        std::vector<int> xc = beam_search_compress(src, *lr.comp, lr.cfg.beam);
        EncoderState ce =
            lr.task->encode(xc, kAll, !lr.cfg.shared_encoder && lr.task->has_independent_encoder());
        rep = CompressedRep{ce.h, ce.h.rows()};
        rp = &rep;
        break;
      }
      case Manner::etc_joint: {
        JointCompressOut jo = joint_greedy_compress({src}, *lr.comp, lr.cfg.beam.gamma);
        rep = jo.reps[0];
        rp = &rep;
        break;
      }
      case Manner::itc_joint: {
        Tensor pf = lr.itc->predict_fertility(enc.h);
        Tensor hc = lr.itc->nat_decode(enc, select_top_k(pf.values(), lr.cfg.itc_gamma));
        rep = CompressedRep{hc, hc.rows()};
        rp = &rep;
        break;
      }
    }
    Memory mem = lr.task->build_memory(enc, rp);
    std::vector<int> out = lr.task->greedy_decode(mem, max_steps);
    out_lines.push_back(detokenize(lr.vocab.decode(out)));
  }
  if (out_path.empty())
    for (const auto& l : out_lines) std::cout << l << "\n";
  else
    write_lines(out_path, out_lines);
  return 0;
}

inline int cmd_evaluate(const std::string& pred_path, const std::string& ref_path,
                        const std::string& metric, bool smooth, bool no_fold,
                        const std::string& out_path) {
  std::vector<std::string> pred_lines = read_lines(pred_path);
  std::vector<std::string> ref_lines = read_lines(ref_path);
  if (pred_lines.size() != ref_lines.size())
    throw DataError("evaluate: prediction and reference line counts differ");
  if (pred_lines.empty()) throw DataError("evaluate: empty files");

  std::vector<std::pair<std::string, double>> kv;
  const bool fold = !no_fold;
  auto tok = [&](const std::string& s) { return tokenize(s); };

  if (metric == "rouge" || metric == "all") {
    double r1 = 0, r2 = 0, rl = 0;
    for (std::size_t i = 0; i < pred_lines.size(); ++i) {
      r1 += rouge_n(tok(pred_lines[i]), tok(ref_lines[i]), 1, fold).f1;
      r2 += rouge_n(tok(pred_lines[i]), tok(ref_lines[i]), 2, fold).f1;
      rl += rouge_l(tok(pred_lines[i]), tok(ref_lines[i]), fold).f1;
    }
    double n = static_cast<double>(pred_lines.size());
    kv.emplace_back("rouge1_f1", r1 / n);
    kv.emplace_back("rouge2_f1", r2 / n);
    kv.emplace_back("rougeL_f1", rl / n);
  }
  if (metric == "bleu" || metric == "all") {
    std::vector<std::vector<std::string>> cands, refs;
    for (std::size_t i = 0; i < pred_lines.size(); ++i) {
      cands.push_back(tok(fold ? lowercase(pred_lines[i]) : pred_lines[i]));
      refs.push_back(tok(fold ? lowercase(ref_lines[i]) : ref_lines[i]));
    }
    kv.emplace_back("bleu", bleu(cands, refs, 4, smooth));
  }
  if (metric == "em-f1" || metric == "all") {
    double em = 0, f1 = 0;
    for (std::size_t i = 0; i < pred_lines.size(); ++i) {
      EmF1 r = span_em_f1(tok(fold ? lowercase(pred_lines[i]) : pred_lines[i]),
                          tok(fold ? lowercase(ref_lines[i]) : ref_lines[i]));
      em += r.em;
      f1 += r.f1;
    }
    double n = static_cast<double>(pred_lines.size());
    kv.emplace_back("em", em / n);
    kv.emplace_back("token_f1", f1 / n);
  }
  if (metric == "accuracy") {
    std::vector<int> p, g;
    for (std::size_t i = 0; i < pred_lines.size(); ++i) {
      p.push_back(std::stoi(pred_lines[i]));
      g.push_back(std::stoi(ref_lines[i]));
    }
    kv.emplace_back("accuracy", accuracy(p, g));
  }
  if (kv.empty()) throw ConfigError("evaluate: unknown metric " + metric);

  std::ostringstream machine, human;
  machine.precision(6);
  machine << std::fixed;
  human << "metric          value\n";
  human << "--------------  --------\n";
  for (const auto& [k, v] : kv) {
    machine << k << "=" << v << "\n";
    human << k;
    for (std::size_t s = k.size(); s < 16; ++s) human << ' ';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    human << buf << "\n";
  }
  machine << "samples=" << pred_lines.size() << "\n";
  std::cout << machine.str() << "\n" << human.str();
  if (!out_path.empty()) {
    std::ofstream os(out_path, std::ios::trunc);
    os << machine.str();
  }
  return 0;
}

inline int cmd_sweep_gamma(const cli_detail::KvCollector& opts, const std::string& grid_text,
                           const std::string& out_path) {
  RunConfig cfg = opts.build();
  cfg.validate();
  std::vector<double> grid = cli_detail::parse_double_list(grid_text);
  TaskData data = load_task_data(cfg);
  std::vector<SweepRow> rows = run_sweep_gamma(cfg, data, grid);
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "gamma\tmetric\n";
  for (const SweepRow& r : rows) os << r.gamma << '\t' << r.metric << '\n';
  std::cout << os.str();
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::trunc);
    f << os.str();
  }
  return 0;
}

inline int cmd_ablate_quality(const cli_detail::KvCollector& opts, const std::string& seeds_text,
                              const std::string& out_path) {
  RunConfig cfg = opts.build();
  cfg.validate();
  std::vector<std::uint64_t> seeds = cli_detail::parse_seed_list(seeds_text);
  TaskData data = load_task_data(cfg);
  std::vector<AblationRow> rows = run_ablation_quality(cfg, data, seeds);
  std::string table = ablation_table(rows, task_is_encoder_decoder(cfg.task)
                                               ? "token_acc"
                                               : (cfg.task == TaskKind::span ? "exact_match"
                                                                             : "accuracy"));
  std::cout << table;
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::trunc);
    f << table;
  }
  return 0;
}

inline int cmd_synthesize_noise(const std::string& in_path, const std::string& out_path,
                                const cli_detail::KvCollector& opts, std::uint64_t seed) {
  NoiseConfig noise;
  auto it = opts.kv.end();
  if ((it = opts.kv.find("noise.additive_fraction")) != opts.kv.end())
    noise.additive_fraction = harness_detail::to_double(it->first, it->second);
  if ((it = opts.kv.find("noise.dropout_p")) != opts.kv.end())
    noise.dropout_p = harness_detail::to_double(it->first, it->second);
  if ((it = opts.kv.find("noise.shuffle_level")) != opts.kv.end())
    noise.shuffle_level = it->second == "sentence" ? NoiseConfig::Shuffle::sentence
                                                   : NoiseConfig::Shuffle::token;
  noise.validate();

  std::vector<std::string> lines = read_lines(in_path);
  std::vector<std::vector<std::string>> tokenized;
  for (const std::string& l : lines)
    if (!l.empty()) tokenized.push_back(tokenize(lowercase(l)));
  if (tokenized.empty()) throw DataError("synthesize-noise: empty corpus");
  Vocab vocab = Vocab::build(tokenized);
  std::vector<std::vector<int>> corpus;
  for (const auto& toks : tokenized) corpus.push_back(vocab.encode(toks));
  noise.full_stop_id = vocab.id(".");

  Rng rng(seed);
  std::vector<std::string> out_lines;
  for (const auto& ids : corpus) {
    auto [noisy, clean] = synthesize_pair(ids, corpus, noise, rng);
    out_lines.push_back(detokenize(vocab.decode(noisy)) + "\t" +
                        detokenize(vocab.decode(clean)));
  }
  write_lines(out_path, out_lines);
  std::cout << "wrote " << out_lines.size() << " pairs to " << out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv) {
  CLI::App app{"text compression-aided transformer toolkit"};
  app.require_subcommand(1);

  cli_detail::KvCollector train_opts;
  CLI::App* train = app.add_subcommand("train", "train a task model under a manner");
  train_opts.add_train_options(train);

  cli_detail::KvCollector comp_opts;
  std::string comp_run, comp_mode = "etc", comp_in, comp_out;
  std::uint64_t comp_seed = 1;
  CLI::App* compress = app.add_subcommand("compress", "compress text, one sequence per line");
  compress->add_option("--run", comp_run, "trained run directory");
  compress->add_option("--mode", comp_mode, "etc | alltext | f8w | randsample");
  compress->add_option("--in", comp_in, "input file")->required();
  compress->add_option("--out", comp_out, "output file (stdout when omitted)");
  compress->add_option("--seed", comp_seed, "sampling seed")->envname("TCAT_SEED");
  comp_opts.add(compress, "--gamma", "beam.gamma", "compression ratio");
  comp_opts.add(compress, "--alpha", "beam.alpha", "length normalization strength");
  comp_opts.add(compress, "--beta", "beam.beta", "coverage penalty strength");
  comp_opts.add(compress, "--beam", "beam.beam_size", "beam size");

  std::string tr_run, tr_in, tr_out;
  std::size_t tr_max_steps = 64;
  CLI::App* translate = app.add_subcommand("translate", "decode with a trained run");
  translate->add_option("--run", tr_run, "trained run directory")->required();
  translate->add_option("--in", tr_in, "input file")->required();
  translate->add_option("--out", tr_out, "output file (stdout when omitted)");
  translate->add_option("--max-steps", tr_max_steps, "decode length cap");

  std::string ev_pred, ev_ref, ev_metric = "all", ev_out;
  bool ev_smooth = false, ev_no_fold = false;
  CLI::App* evaluate = app.add_subcommand("evaluate", "score predictions against references");
  evaluate->add_option("--pred", ev_pred, "prediction file")->required();
  evaluate->add_option("--ref", ev_ref, "reference file")->required();
  evaluate->add_option("--metric", ev_metric, "rouge | bleu | em-f1 | accuracy | all");
  evaluate->add_flag("--smooth", ev_smooth, "add-one BLEU smoothing");
  evaluate->add_flag("--no-fold", ev_no_fold, "disable case folding");
  evaluate->add_option("--out", ev_out, "write the machine-readable report here");

  cli_detail::KvCollector sweep_opts;
  std::string sweep_grid = "0.2,0.4,0.6,0.8,1.0", sweep_out;
  CLI::App* sweep = app.add_subcommand("sweep-gamma", "train/evaluate across ratios");
  sweep_opts.add_train_options(sweep);
  sweep->add_option("--grid", sweep_grid, "comma-separated gamma values");
  sweep->add_option("--report", sweep_out, "write the gamma/metric table here");

  cli_detail::KvCollector abl_opts;
  std::string abl_seeds = "1,2,3", abl_out;
  CLI::App* ablate = app.add_subcommand("ablate-quality", "compression-quality comparison");
  abl_opts.add_train_options(ablate);
  ablate->add_option("--seeds", abl_seeds, "comma-separated seeds");
  ablate->add_option("--report", abl_out, "write the comparison table here");

  cli_detail::KvCollector syn_opts;
  std::string syn_in, syn_out;
  std::uint64_t syn_seed = 1;
  CLI::App* synth = app.add_subcommand("synthesize-noise", "build pseudo pairs from a corpus");
  synth->add_option("--in", syn_in, "corpus file")->required();
  synth->add_option("--out", syn_out, "pair file to write")->required();
  synth->add_option("--seed", syn_seed, "noise seed")->envname("TCAT_SEED");
  syn_opts.add(synth, "--noise-additive", "noise.additive_fraction", "additive fraction");
  syn_opts.add(synth, "--noise-dropout", "noise.dropout_p", "word dropout probability");
  syn_opts.add(synth, "--noise-shuffle", "noise.shuffle_level", "token | sentence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(train_opts);
    if (*compress) return cmd_compress(comp_run, comp_mode, comp_in, comp_out, comp_opts, comp_seed);
    if (*translate) return cmd_translate(tr_run, tr_in, tr_out, tr_max_steps);
    if (*evaluate) return cmd_evaluate(ev_pred, ev_ref, ev_metric, ev_smooth, ev_no_fold, ev_out);
    if (*sweep) return cmd_sweep_gamma(sweep_opts, sweep_grid, sweep_out);
    if (*ablate) return cmd_ablate_quality(abl_opts, abl_seeds, abl_out);
    if (*synth) return cmd_synthesize_noise(syn_in, syn_out, syn_opts, syn_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace tcat::cli
