#pragma once

// Run orchestration: configuration (files + overrides), dataset loading,
// the three compression-aided training manners, evaluation, the gamma
// sweep and the compression-quality ablation.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tcat/checkpoint.hpp"
#include "tcat/data.hpp"
#include "tcat/etc.hpp"
#include "tcat/itc.hpp"
#include "tcat/metrics.hpp"
#include "tcat/tasks.hpp"

namespace tcat {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Manner { none, etc_pipeline, etc_joint, itc_joint };
enum class Setting { supervised, unsupervised, semi };

// How pipeline compressions are produced; the quality ablation swaps the
// trained compressor for the trivial baselines.
enum class CompressionSource { trained, alltext, f8w, randsample };

inline const char* manner_name(Manner m) {
  switch (m) {
    case Manner::none: return "none";
    case Manner::etc_pipeline: return "etc-pipeline";
    case Manner::etc_joint: return "etc-joint";
    case Manner::itc_joint: return "itc-joint";
  }
  return "?";
}

inline Manner parse_manner(const std::string& s) {
  if (s == "none") return Manner::none;
  if (s == "etc-pipeline") return Manner::etc_pipeline;
  if (s == "etc-joint") return Manner::etc_joint;
  if (s == "itc-joint") return Manner::itc_joint;
  throw ConfigError("unknown manner: " + s);
}

inline const char* setting_name(Setting s) {
  switch (s) {
    case Setting::supervised: return "supervised";
    case Setting::unsupervised: return "unsupervised";
    case Setting::semi: return "semi";
  }
  return "?";
}

inline Setting parse_setting(const std::string& s) {
  if (s == "supervised") return Setting::supervised;
  if (s == "unsupervised") return Setting::unsupervised;
  if (s == "semi") return Setting::semi;
  throw ConfigError("unknown setting: " + s);
}

inline const char* source_name(CompressionSource s) {
  switch (s) {
    case CompressionSource::trained: return "trained";
    case CompressionSource::alltext: return "alltext";
    case CompressionSource::f8w: return "f8w";
    case CompressionSource::randsample: return "randsample";
  }
  return "?";
}

inline CompressionSource parse_source(const std::string& s) {
  if (s == "trained") return CompressionSource::trained;
  if (s == "alltext") return CompressionSource::alltext;
  if (s == "f8w") return CompressionSource::f8w;
  if (s == "randsample") return CompressionSource::randsample;
  throw ConfigError("unknown compression source: " + s);
}

struct TrainParams {
  std::size_t steps = 300;       // task-phase optimization steps
  std::size_t comp_steps = 300;  // compressor / stage-1 steps
  std::size_t batch = 16;
  double lr = 1e-3;
  std::size_t warmup = 50;       // linear learning-rate warmup steps per phase
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t log_every = 10;
  std::size_t checkpoint_every = 0;  // 0: only at the end
};

// Fixed schedule: linear warmup, constant, then a 0.3 step-down over the
// final 40% of the phase to settle convergence.
inline AdamConfig warmed(const TrainParams& tp, std::size_t step, std::size_t horizon) {
  AdamConfig cfg{tp.lr, tp.beta1, tp.beta2, tp.eps};
  if (tp.warmup > 0)
    cfg.lr *= std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(tp.warmup));
  if (horizon > 0 && step >= (horizon * 3) / 5) cfg.lr *= 0.3;
  return cfg;
}

struct RunConfig {
  TaskKind task = TaskKind::translate;
  FusionMode fusion = FusionMode::none;
  Manner manner = Manner::none;
  Setting setting = Setting::supervised;
  CompressionSource comp_source = CompressionSource::trained;

  BeamConfig beam;          // gamma/alpha/beta/beam for explicit compression
  double itc_gamma = 0.4;

  ModelConfig model;        // downstream dims; vocab filled from data
  ModelConfig comp_model;   // ETC compressor dims
  ModelConfig nat_model;    // ITC NAT decoder dims
  bool shared_encoder = true;  // pipeline re-encoding via the task encoder
  double joint_comp_weight = 1.0;

  TrainParams train;
  NoiseConfig noise;
  std::uint64_t seed = 1;

  std::string train_path, dev_path, test_path;
  std::string comp_pairs_path, corpus_path, vocab_path;
  std::string out_dir, resume_path;

  RunConfig() {
    model.layers = 2;
    model.d_model = 128;
    model.d_ff = 512;
    model.heads = 4;
    comp_model = model;
    nat_model = model;
  }

  void validate() const {
    if (fusion_uses_decoder_gate(fusion) && !task_is_encoder_decoder(task))
      throw ConfigError("fusion " + std::string(fusion_name(fusion)) +
                        " requires an encoder-decoder task");
    if (manner != Manner::none && fusion == FusionMode::none)
      throw ConfigError("a compression manner needs a fusion mode");
    if (manner == Manner::none && fusion != FusionMode::none)
      throw ConfigError("a fusion mode needs a compression manner");
    if (task == TaskKind::compress && manner != Manner::none)
      throw ConfigError("compressor training does not take a compression manner");
    if (manner == Manner::itc_joint && !(itc_gamma > 0.0 && itc_gamma <= 1.0))
      throw ConfigError("itc gamma must be in (0,1]");
    if (train.steps < 1 || train.batch < 1) throw ConfigError("steps and batch must be >= 1");
    try {
      beam.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (model.d_model % model.heads != 0 || comp_model.d_model % comp_model.heads != 0 ||
        nat_model.d_model % nat_model.heads != 0)
      throw ConfigError("d_model must be divisible by heads");
    if (model.dropout < 0.0 || model.dropout >= 1.0)
      throw ConfigError("dropout must be in [0,1)");
  }
};

// ---------------------------------------------------------------------------
// config files: [section] + key = value, '#' comments, flags override file

inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto trim = [](std::string s) {
      std::size_t b = s.find_first_not_of(" \t\r");
      std::size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[section.empty() ? key : section + "." + key] = val;
  }
  return kv;
}

namespace harness_detail {

inline double to_double(const std::string& k, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key " + k + ": bad number '" + v + "'");
  }
}

inline std::size_t to_size(const std::string& k, const std::string& v) {
  double d = to_double(k, v);
  if (d < 0 || d != std::floor(d)) throw ConfigError("config key " + k + ": bad count '" + v + "'");
  return static_cast<std::size_t>(d);
}

inline bool to_bool(const std::string& k, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key " + k + ": bad bool '" + v + "'");
}

inline void apply_model_key(ModelConfig& m, const std::string& key, const std::string& full,
                            const std::string& v) {
  if (key == "layers") m.layers = to_size(full, v);
  else if (key == "d_model") m.d_model = to_size(full, v);
  else if (key == "d_ff") m.d_ff = to_size(full, v);
  else if (key == "heads") m.heads = to_size(full, v);
  else if (key == "max_len") m.max_len = to_size(full, v);
  else if (key == "pre_norm") m.pre_norm = to_bool(full, v);
  else if (key == "scale_by_d_model") m.scale_by_d_model = to_bool(full, v);
  else if (key == "dropout") m.dropout = to_double(full, v);
  else throw ConfigError("unknown config key: " + full);
}

}  // namespace harness_detail

inline void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& v) {
  using namespace harness_detail;
  if (key == "run.task") cfg.task = parse_task(v);
  else if (key == "run.fusion") cfg.fusion = parse_fusion(v);
  else if (key == "run.manner") cfg.manner = parse_manner(v);
  else if (key == "run.setting") cfg.setting = parse_setting(v);
  else if (key == "run.comp_source") cfg.comp_source = parse_source(v);
  else if (key == "run.seed") cfg.seed = static_cast<std::uint64_t>(to_size(key, v));
  else if (key == "run.shared_encoder") cfg.shared_encoder = to_bool(key, v);
  else if (key == "run.joint_comp_weight") cfg.joint_comp_weight = to_double(key, v);
  else if (key == "beam.gamma") cfg.beam.gamma = to_double(key, v);
  else if (key == "beam.alpha") cfg.beam.alpha = to_double(key, v);
  else if (key == "beam.beta") cfg.beam.beta = to_double(key, v);
  else if (key == "beam.beam_size") cfg.beam.beam_size = to_size(key, v);
  else if (key == "beam.min_len") cfg.beam.min_len = to_size(key, v);
  else if (key == "itc.gamma") cfg.itc_gamma = to_double(key, v);
  else if (key == "train.steps") cfg.train.steps = to_size(key, v);
  else if (key == "train.comp_steps") cfg.train.comp_steps = to_size(key, v);
  else if (key == "train.batch") cfg.train.batch = to_size(key, v);
  else if (key == "train.lr") cfg.train.lr = to_double(key, v);
  else if (key == "train.warmup") cfg.train.warmup = to_size(key, v);
  else if (key == "train.beta1") cfg.train.beta1 = to_double(key, v);
  else if (key == "train.beta2") cfg.train.beta2 = to_double(key, v);
  else if (key == "train.eps") cfg.train.eps = to_double(key, v);
  else if (key == "train.log_every") cfg.train.log_every = to_size(key, v);
  else if (key == "train.checkpoint_every") cfg.train.checkpoint_every = to_size(key, v);
  else if (key == "noise.additive_fraction") cfg.noise.additive_fraction = to_double(key, v);
  else if (key == "noise.dropout_p") cfg.noise.dropout_p = to_double(key, v);
  else if (key == "noise.shuffle_level")
    cfg.noise.shuffle_level =
        v == "sentence" ? NoiseConfig::Shuffle::sentence : NoiseConfig::Shuffle::token;
  else if (key == "data.train") cfg.train_path = v;
  else if (key == "data.dev") cfg.dev_path = v;
  else if (key == "data.test") cfg.test_path = v;
  else if (key == "data.comp_pairs") cfg.comp_pairs_path = v;
  else if (key == "data.corpus") cfg.corpus_path = v;
  else if (key == "data.vocab") cfg.vocab_path = v;
  else if (key == "data.out") cfg.out_dir = v;
  else if (key == "data.resume") cfg.resume_path = v;
  else if (key.rfind("model.", 0) == 0)
    harness_detail::apply_model_key(cfg.model, key.substr(6), key, v);
  else if (key.rfind("comp_model.", 0) == 0)
    harness_detail::apply_model_key(cfg.comp_model, key.substr(11), key, v);
  else if (key.rfind("nat_model.", 0) == 0)
    harness_detail::apply_model_key(cfg.nat_model, key.substr(10), key, v);
  else
    throw ConfigError("unknown config key: " + key);
}

inline void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  for (const auto& [k, v] : parse_config_text(ss.str())) apply_config_kv(cfg, k, v);
}

// Self-describing snapshot: every knob a run depends on, reloadable through
// the same parser.
inline std::string config_snapshot(const RunConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "[run]\n";
  os << "task = " << task_name(cfg.task) << "\n";
  os << "fusion = " << fusion_name(cfg.fusion) << "\n";
  os << "manner = " << manner_name(cfg.manner) << "\n";
  os << "setting = " << setting_name(cfg.setting) << "\n";
  os << "comp_source = " << source_name(cfg.comp_source) << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "shared_encoder = " << (cfg.shared_encoder ? "true" : "false") << "\n";
  os << "joint_comp_weight = " << cfg.joint_comp_weight << "\n";
  os << "\n[beam]\n";
  os << "gamma = " << cfg.beam.gamma << "\n";
  os << "alpha = " << cfg.beam.alpha << "\n";
  os << "beta = " << cfg.beam.beta << "\n";
  os << "beam_size = " << cfg.beam.beam_size << "\n";
  os << "min_len = " << cfg.beam.min_len << "\n";
  os << "\n[itc]\n";
  os << "gamma = " << cfg.itc_gamma << "\n";
  auto model_block = [&](const char* name, const ModelConfig& m) {
    os << "\n[" << name << "]\n";
    os << "layers = " << m.layers << "\n";
    os << "d_model = " << m.d_model << "\n";
    os << "d_ff = " << m.d_ff << "\n";
    os << "heads = " << m.heads << "\n";
    os << "max_len = " << m.max_len << "\n";
    os << "pre_norm = " << (m.pre_norm ? "true" : "false") << "\n";
    os << "scale_by_d_model = " << (m.scale_by_d_model ? "true" : "false") << "\n";
    os << "dropout = " << m.dropout << "\n";
  };
  model_block("model", cfg.model);
  model_block("comp_model", cfg.comp_model);
  model_block("nat_model", cfg.nat_model);
  os << "\n[train]\n";
  os << "steps = " << cfg.train.steps << "\n";
  os << "comp_steps = " << cfg.train.comp_steps << "\n";
  os << "batch = " << cfg.train.batch << "\n";
  os << "lr = " << cfg.train.lr << "\n";
  os << "warmup = " << cfg.train.warmup << "\n";
  os << "beta1 = " << cfg.train.beta1 << "\n";
  os << "beta2 = " << cfg.train.beta2 << "\n";
  os << "eps = " << cfg.train.eps << "\n";
  os << "log_every = " << cfg.train.log_every << "\n";
  os << "checkpoint_every = " << cfg.train.checkpoint_every << "\n";
  os << "\n[noise]\n";
  os << "additive_fraction = " << cfg.noise.additive_fraction << "\n";
  os << "dropout_p = " << cfg.noise.dropout_p << "\n";
  os << "shuffle_level = "
     << (cfg.noise.shuffle_level == NoiseConfig::Shuffle::sentence ? "sentence" : "token")
     << "\n";
  os << "\n[data]\n";
  if (!cfg.train_path.empty()) os << "train = " << cfg.train_path << "\n";
  if (!cfg.dev_path.empty()) os << "dev = " << cfg.dev_path << "\n";
  if (!cfg.test_path.empty()) os << "test = " << cfg.test_path << "\n";
  if (!cfg.comp_pairs_path.empty()) os << "comp_pairs = " << cfg.comp_pairs_path << "\n";
  if (!cfg.corpus_path.empty()) os << "corpus = " << cfg.corpus_path << "\n";
  if (!cfg.vocab_path.empty()) os << "vocab = " << cfg.vocab_path << "\n";
  if (!cfg.out_dir.empty()) os << "out = " << cfg.out_dir << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// datasets

struct TaskData {
  Vocab vocab;
  std::vector<TaskSample> train, dev, test;
  std::vector<PairSample> comp_pairs;       // labeled compression pairs
  std::vector<std::vector<int>> corpus;     // unlabeled sequences for noise synthesis
};

namespace harness_detail {

inline std::vector<int> encode_text(const Vocab& v, const std::string& text) {
  return v.encode(tokenize(lowercase(text)));
}

inline TaskSample parse_task_line(TaskKind kind, const Vocab& v, const std::string& line,
                                  const std::string& path, std::size_t lineno) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  auto fail = [&](const std::string& why) -> TaskSample {
    throw DataError(path + ":" + std::to_string(lineno) + ": " + why);
  };
  TaskSample s;
  s.kind = kind;
  switch (kind) {
    case TaskKind::translate:
    case TaskKind::compress:
      if (fields.size() != 2) return fail("expected source TAB target");
      s.src = encode_text(v, fields[0]);
      s.tgt = encode_text(v, fields[1]);
      if (s.src.empty() || s.tgt.empty()) return fail("empty source or target");
      return s;
    case TaskKind::span: {
      if (fields.size() != 4) return fail("expected passage TAB question TAB start TAB end");
      s.passage = encode_text(v, fields[0]);
      s.question = encode_text(v, fields[1]);
      s.ans_start = std::stoi(fields[2]);
      s.ans_end = std::stoi(fields[3]);
      if (s.passage.empty() || s.question.empty()) return fail("empty passage or question");
      if (s.ans_start > s.ans_end || s.ans_end >= static_cast<int>(s.passage.size()))
        if (!(s.ans_start == -1 && s.ans_end == -1)) return fail("bad span bounds");
      return s;
    }
    case TaskKind::choice: {
      if (fields.size() != 4) return fail("expected passage TAB question TAB options TAB answer");
      s.passage = encode_text(v, fields[0]);
      s.question = encode_text(v, fields[1]);
      std::size_t p = 0;
      while (true) {
        std::size_t bar = fields[2].find('|', p);
        s.options.push_back(encode_text(
            v, fields[2].substr(p, bar == std::string::npos ? bar : bar - p)));
        if (bar == std::string::npos) break;
        p = bar + 1;
      }
      s.ans_choice = std::stoi(fields[3]);
      if (s.options.size() < 2) return fail("need at least two options");
      if (s.ans_choice < 0 || s.ans_choice >= static_cast<int>(s.options.size()))
        return fail("answer index out of range");
      return s;
    }
  }
  return fail("bad task kind");
}

}  // namespace harness_detail

inline std::vector<TaskSample> load_task_file(TaskKind kind, const Vocab& v,
                                              const std::string& path) {
  std::vector<TaskSample> out;
  std::size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    out.push_back(harness_detail::parse_task_line(kind, v, line, path, lineno));
  }
  if (out.empty()) throw DataError("no samples in " + path);
  return out;
}

// Builds TaskData from the paths in the config. The vocabulary comes from
// vocab_path when given, otherwise it is built from every referenced file.
inline TaskData load_task_data(const RunConfig& cfg) {
  if (cfg.train_path.empty()) throw ConfigError("train data path required");
  TaskData d;
  std::vector<std::vector<std::string>> all_tokens;
  auto collect = [&](const std::string& path, bool pairs) {
    if (path.empty()) return;
    for (const std::string& line : read_lines(path)) {
      if (line.empty()) continue;
      if (pairs) {
        std::size_t tab = line.find('\t');
        std::string rest = line;
        while (true) {
          std::size_t t = rest.find('\t');
          std::string field = rest.substr(0, t);
          std::size_t bar_start = 0;  // option separators also split
          while (true) {
            std::size_t bar = field.find('|', bar_start);
            all_tokens.push_back(
                tokenize(lowercase(field.substr(bar_start, bar == std::string::npos
                                                               ? bar
                                                               : bar - bar_start))));
            if (bar == std::string::npos) break;
            bar_start = bar + 1;
          }
          if (t == std::string::npos) break;
          rest = rest.substr(t + 1);
        }
        (void)tab;
      } else {
        all_tokens.push_back(tokenize(lowercase(line)));
      }
    }
  };
  if (!cfg.vocab_path.empty()) {
    d.vocab = Vocab::load(cfg.vocab_path);
  } else {
    collect(cfg.train_path, true);
    collect(cfg.dev_path, true);
    collect(cfg.test_path, true);
    collect(cfg.comp_pairs_path, true);
    collect(cfg.corpus_path, false);
    d.vocab = Vocab::build(all_tokens);
  }
  d.train = load_task_file(cfg.task, d.vocab, cfg.train_path);
  if (!cfg.dev_path.empty()) d.dev = load_task_file(cfg.task, d.vocab, cfg.dev_path);
  if (!cfg.test_path.empty()) d.test = load_task_file(cfg.task, d.vocab, cfg.test_path);
  if (!cfg.comp_pairs_path.empty()) {
    for (const auto& [in, tgt] : read_pair_lines(cfg.comp_pairs_path)) {
      PairSample p;
      p.src = harness_detail::encode_text(d.vocab, in);
      p.tgt = harness_detail::encode_text(d.vocab, tgt);
      if (!p.src.empty() && !p.tgt.empty()) d.comp_pairs.push_back(std::move(p));
    }
  }
  if (!cfg.corpus_path.empty()) {
    for (const std::string& line : read_lines(cfg.corpus_path)) {
      if (line.empty()) continue;
      std::vector<int> ids = harness_detail::encode_text(d.vocab, line);
      if (!ids.empty()) d.corpus.push_back(std::move(ids));
    }
  }
  return d;
}

// In-memory keep/drop translation data for synthetic experiments: sources
// mix backbone and filler tokens, targets are the backbone subsequences,
// and the same pairs double as labeled compression data.
inline TaskData make_synthetic_task_data(const SyntheticSpec& spec, std::size_t n_train,
                                         std::size_t n_test, std::uint64_t seed) {
  std::vector<PairSample> set = make_synthetic_supervised_set(spec, n_train + n_test, seed);
  TaskData d;
  for (std::size_t id = special::kReservedCount; id < spec.total_vocab(); ++id)
    d.vocab.add("w" + std::to_string(id));
  for (std::size_t i = 0; i < set.size(); ++i) {
    TaskSample s;
    s.kind = TaskKind::translate;
    s.src = set[i].src;
    s.tgt = set[i].tgt;
    (i < n_train ? d.train : d.test).push_back(std::move(s));
    if (i < n_train) d.comp_pairs.push_back(set[i]);
  }
  for (const TaskSample& s : d.train) d.corpus.push_back(s.src);
  return d;
}

// ---------------------------------------------------------------------------
// batching

// Deterministic shuffled-epoch index stream, reconstructible at any step
// count, which is what makes checkpoint resume bit-exact.
class BatchCursor {
 public:
  BatchCursor(std::size_t n, std::size_t batch, std::uint64_t seed)
      : n_(n), batch_(batch), seed_(seed) {
    if (n == 0) throw std::invalid_argument("BatchCursor: empty dataset");
    reload(0);
  }

  std::vector<std::size_t> next() {
    std::vector<std::size_t> out;
    out.reserve(batch_);
    for (std::size_t i = 0; i < batch_; ++i) {
      if (offset_ == n_) reload(epoch_ + 1);
      out.push_back(order_[offset_++]);
    }
    return out;
  }

  void seek(std::size_t consumed) {
    reload(consumed / n_);
    offset_ = consumed % n_;
  }

  std::size_t consumed() const { return epoch_ * n_ + offset_; }

 private:
  void reload(std::size_t epoch) {
    epoch_ = epoch;
    offset_ = 0;
    order_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
    Rng rng(seed_ ^ (0x9e3779b97f4a7c15ull * (epoch + 1)));
    rng.shuffle(order_);
  }

  std::size_t n_, batch_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0, offset_ = 0;
  std::vector<std::size_t> order_;
};

// ---------------------------------------------------------------------------
// run

struct StepLog {
  std::string phase;
  std::size_t step = 0;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<StepLog> log;
  double metric = 0.0;
  std::string metric_name;
};

class Run {
 public:
  Run(const RunConfig& cfg, TaskData data) : cfg_(cfg), data_(std::move(data)) {
    cfg_.validate();
    if (data_.train.empty()) throw DataError("run: empty training set");
    cfg_.model.vocab_size = data_.vocab.size();
    cfg_.comp_model.vocab_size = data_.vocab.size();
    cfg_.nat_model.vocab_size = data_.vocab.size();
    Rng rng(cfg_.seed);
    if (task_is_encoder_decoder(cfg_.task)) {
      bool independent = needs_pipeline() && !cfg_.shared_encoder;
      seq2seq_ = std::make_unique<Seq2Seq>(cfg_.model, cfg_.fusion, rng, independent);
    } else {
      clf_ = std::make_unique<EncoderClassifier>(cfg_.model, cfg_.fusion, rng);
    }
    if (needs_compressor()) {
      Rng crng = rng.split(0xc0);
      comp_ = std::make_unique<Seq2Seq>(cfg_.comp_model, FusionMode::none, crng);
    }
    if (cfg_.manner == Manner::itc_joint) {
      ItcConfig ic;
      ic.gamma = cfg_.itc_gamma;
      ic.nat = cfg_.nat_model;
      ic.nat.vocab_size = data_.vocab.size();
      ic.in_width = cfg_.model.d_model;
      ic.out_width = cfg_.model.d_model;
      Rng irng = rng.split(0x17c);
      itc_ = std::make_unique<ItcModule>(ic, irng);
    }
  }

  const RunConfig& config() const { return cfg_; }
  const TaskData& data() const { return data_; }
  Seq2Seq* task_seq2seq() { return seq2seq_.get(); }
  EncoderClassifier* classifier() { return clf_.get(); }
  Seq2Seq* compressor() { return comp_.get(); }
  ItcModule* itc() { return itc_.get(); }

  // full manner schedule: compressor phases, pipeline caching, task phase
  TrainResult train() {
    TrainResult res;
    std::size_t resume_step = 0;
    if (!cfg_.resume_path.empty()) resume_step = restore(cfg_.resume_path);
    if (resume_step == 0) {
      if (needs_compressor() && cfg_.comp_source == CompressionSource::trained)
        train_compressor(res);
      if (cfg_.manner == Manner::itc_joint) train_itc_stage1(res);
    }
    if (needs_pipeline()) build_pipeline_cache();
    train_task(res, resume_step);
    res.metric = evaluate();
    res.metric_name = metric_name();
    if (!cfg_.out_dir.empty()) write_artifacts(res);
    return res;
  }

  // task metric on the held-out set (train set when no test set was given)
  double evaluate() {
    const std::vector<TaskSample>& eval_set = data_.test.empty() ? data_.train : data_.test;
    return evaluate_on(eval_set);
  }

  double evaluate_on(const std::vector<TaskSample>& samples) {
    NoGradGuard ng;
    set_training(false);
    const bool cached = &samples == &data_.test && !comp_cache_test_.empty();
    if (task_is_encoder_decoder(cfg_.task)) {
      std::size_t hit = 0, total = 0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const TaskSample& s = samples[i];
        Memory mem = task_memory_indexed(s, true, cached ? i : npos_index_);
        std::vector<int> tgt = clip(s.tgt);
        std::vector<int> input{special::kBos};
        input.insert(input.end(), tgt.begin(), tgt.end());
        std::vector<int> labels = tgt;
        labels.push_back(special::kEos);
        Tensor logits = seq2seq_->decode_logits(input, mem);
        for (std::size_t p = 0; p < labels.size(); ++p) {
          hit += argmax_row(logits, p) == labels[p];
          ++total;
        }
      }
      return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
    }
    if (cfg_.task == TaskKind::span) {
      std::size_t exact = 0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const TaskSample& s = samples[i];
        auto [input, gold] = span_io(s);
        Tensor h = clf_hidden_indexed(s, input, cached ? i : npos_index_, true);
        auto [sd, ed] = clf_->span_predict(h);
        auto got = span_argmax(sd.values(), ed.values());
        exact += got == gold;
      }
      return static_cast<double>(exact) / static_cast<double>(samples.size());
    }
    std::size_t hit = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const TaskSample& s = samples[i];
      std::vector<Tensor> hs;
      for (const auto& o : s.options)
        hs.push_back(clf_hidden_indexed(
            s, build_choice_input(s.passage, s.question, o, cfg_.model.max_len),
            cached ? i : npos_index_, true));
      hit += argmax_row(clf_->choice_predict(hs), 0) == s.ans_choice;
    }
    return static_cast<double>(hit) / static_cast<double>(samples.size());
  }

  std::string metric_name() const {
    if (task_is_encoder_decoder(cfg_.task)) return "token_acc";
    return cfg_.task == TaskKind::span ? "exact_match" : "accuracy";
  }

  // compression of one source sequence in pipeline mode
  std::vector<int> compress_tokens(const std::vector<int>& src, Rng& rng) const {
    switch (cfg_.comp_source) {
      case CompressionSource::trained:
        return beam_search_compress(src, *comp_, cfg_.beam);
      case CompressionSource::alltext:
        return baseline_compress(src, BaselineMode::alltext, cfg_.beam.gamma, rng);
      case CompressionSource::f8w:
        return baseline_compress(src, BaselineMode::f8w, cfg_.beam.gamma, rng);
      case CompressionSource::randsample:
        return baseline_compress(src, BaselineMode::randsample, cfg_.beam.gamma, rng);
    }
    throw std::logic_error("compress_tokens: bad source");
  }

  void save(const std::string& path) const {
    Checkpoint ck;
    NamedParams all = all_params();
    checkpoint_put_params(ck, all);
    // optimizer state belongs to the task-phase parameter list
    checkpoint_put_adam(ck, adam_, task_phase_params());
    ck.add_scalar("meta.task_step", static_cast<double>(task_step_));
    write_checkpoint(path, ck);
  }

  std::size_t restore(const std::string& path) {
    Checkpoint ck = read_checkpoint(path);
    NamedParams all = all_params();
    checkpoint_load_params(ck, all);
    NamedParams task_params = task_phase_params();
    checkpoint_load_adam(ck, adam_, task_params);
    task_step_ = static_cast<std::size_t>(ck.scalar("meta.task_step", 0.0));
    return task_step_;
  }

  NamedParams all_params() const {
    NamedParams out;
    if (seq2seq_) {
      NamedParams p = seq2seq_->named_params("task");
      out.insert(out.end(), p.begin(), p.end());
    }
    if (clf_) {
      NamedParams p = clf_->named_params("task");
      out.insert(out.end(), p.begin(), p.end());
    }
    if (comp_) {
      NamedParams p = comp_->named_params("comp");
      out.insert(out.end(), p.begin(), p.end());
    }
    if (itc_) {
      NamedParams p = itc_->named_params("itc");
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

 private:
  bool needs_compressor() const {
    return cfg_.manner == Manner::etc_pipeline || cfg_.manner == Manner::etc_joint;
  }
  bool needs_pipeline() const { return cfg_.manner == Manner::etc_pipeline; }

  void set_training(bool on) {
    if (seq2seq_) seq2seq_->set_training(on);
    if (clf_) clf_->set_training(on);
    if (comp_) comp_->set_training(on);
    if (itc_) itc_->set_training(on);
  }

  // --- compressor phase -------------------------------------------------

  // (input, target) pairs for compressor training under the current setting
  std::vector<PairSample> comp_training_pairs(bool unsupervised_phase) {
    if (!unsupervised_phase) {
      if (data_.comp_pairs.empty())
        throw DataError("supervised compression training needs comp_pairs data");
      return data_.comp_pairs;
    }
    std::vector<std::vector<int>> corpus = data_.corpus;
    if (corpus.empty()) {
      for (const TaskSample& s : data_.train)
        corpus.push_back(task_is_encoder_decoder(cfg_.task) ? s.src : s.passage);
    }
    if (corpus.empty()) throw DataError("unsupervised compression training needs a corpus");
    Rng rng(cfg_.seed ^ 0x4015eULL);
    std::vector<PairSample> out;
    for (const auto& line : corpus) {
      if (line.empty()) continue;
      auto [noisy, clean] = synthesize_pair(line, corpus, cfg_.noise, rng);
      PairSample p;
      p.src = std::move(noisy);
      p.tgt = clean;
      out.push_back(std::move(p));
    }
    return out;
  }

  void train_compressor(TrainResult& res) {
    if (cfg_.train.comp_steps == 0) return;
    NamedParams named = comp_->named_params("comp");
    std::vector<Tensor> params = values_of(named);
    AdamState st;
    set_training(true);
    auto phase = [&](const char* name, const std::vector<PairSample>& pairs,
                     std::size_t steps, std::uint64_t salt) {
      if (steps == 0 || pairs.empty()) return;
      BatchCursor cursor(pairs.size(), cfg_.train.batch, cfg_.seed ^ salt);
      for (std::size_t s = 0; s < steps; ++s) {
        zero_grads(params);
        Tensor loss = Tensor::scalar(0.0);
        for (std::size_t i : cursor.next()) {
          const PairSample& p = pairs[i];
          Memory mem = comp_->build_memory(comp_->encode(clip(p.src)));
          loss = add(loss, comp_->teacher_loss(clip(p.tgt), mem));
        }
        loss = scale(loss, 1.0 / static_cast<double>(cfg_.train.batch));
        backward(loss);
        adam_step(params, st, warmed(cfg_.train, s, steps));
        log_step(res, name, s, loss.item());
      }
    };
    switch (cfg_.setting) {
      case Setting::supervised:
        phase("comp_supervised", comp_training_pairs(false), cfg_.train.comp_steps, 0x50bULL);
        break;
      case Setting::unsupervised:
        phase("comp_unsupervised", comp_training_pairs(true), cfg_.train.comp_steps, 0x0a1ULL);
        break;
      case Setting::semi: {
        std::size_t unsup = cfg_.train.comp_steps / 2;
        phase("comp_unsupervised", comp_training_pairs(true), unsup, 0x0a1ULL);
        phase("comp_supervised", comp_training_pairs(false), cfg_.train.comp_steps - unsup,
              0x50bULL);
        break;
      }
    }
    set_training(false);
  }

  void train_itc_stage1(TrainResult& res) {
    if (cfg_.train.comp_steps == 0) return;
    std::vector<PairSample> pairs;
    auto usable = [&](const PairSample& p) {
      return !p.tgt.empty() && p.tgt.size() <= p.src.size();
    };
    auto gather = [&](bool unsup) {
      for (const PairSample& p : comp_training_pairs(unsup))
        if (usable(p)) pairs.push_back(p);
    };
    switch (cfg_.setting) {
      case Setting::supervised: gather(false); break;
      case Setting::unsupervised: gather(true); break;
      case Setting::semi:
        gather(true);
        gather(false);
        break;
    }
    if (pairs.empty()) throw DataError("itc stage-1: no usable compression pairs");
    NamedParams named = itc_stage1_params();
    std::vector<Tensor> params = values_of(named);
    AdamState st;
    set_training(true);
    BatchCursor cursor(pairs.size(), cfg_.train.batch, cfg_.seed ^ 0x17c1);
    for (std::size_t s = 0; s < cfg_.train.comp_steps; ++s) {
      zero_grads(params);
      std::vector<std::vector<int>> xs, ys;
      for (std::size_t i : cursor.next()) {
        xs.push_back(clip(pairs[i].src));
        ys.push_back(clip(pairs[i].tgt));
        if (ys.back().size() > xs.back().size()) ys.back().resize(xs.back().size());
      }
      Tensor loss = encoder_decoder_task() ? itc_pretrain_step(*seq2seq_, *itc_, xs, ys)
                                           : itc_pretrain_step_clf(xs, ys);
      backward(loss);
      adam_step(params, st, warmed(cfg_.train, s, cfg_.train.comp_steps));
      log_step(res, "itc_stage1", s, loss.item());
    }
    set_training(false);
  }

  NamedParams itc_stage1_params() const {
    NamedParams named = itc_->named_params("itc");
    // the shared encoder trains in stage-1 too
    NamedParams enc = seq2seq_ ? seq2seq_->named_params("task") : clf_->named_params("task");
    named.insert(named.end(), enc.begin(), enc.end());
    return named;
  }

  Tensor itc_pretrain_step_clf(const std::vector<std::vector<int>>& xs,
                               const std::vector<std::vector<int>>& ys) {
    Tensor total = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      EncoderState enc = clf_->encode(xs[i]);
      total = add(total, itc_->pretrain_pair_loss(enc, xs[i], ys[i]));
    }
    return scale(total, 1.0 / static_cast<double>(xs.size()));
  }

  bool encoder_decoder_task() const { return seq2seq_ != nullptr; }

  // --- pipeline compression cache ----------------------------------------

  void build_pipeline_cache() {
    NoGradGuard ng;
    set_training(false);
    Rng rng(cfg_.seed ^ 0xcac4eULL);
    auto build = [&](const std::vector<TaskSample>& set,
                     std::vector<std::vector<int>>& cache) {
      cache.clear();
      cache.reserve(set.size());
      for (const TaskSample& s : set) {
        const std::vector<int>& src =
            task_is_encoder_decoder(cfg_.task) ? s.src : s.passage;
        cache.push_back(compress_tokens(clip(src), rng));
      }
    };
    build(data_.train, comp_cache_train_);
    if (!data_.test.empty()) build(data_.test, comp_cache_test_);
  }

  // --- task phase ---------------------------------------------------------

  Memory task_memory(const TaskSample& s, bool eval) {
    return task_memory_indexed(s, eval, npos_index_);
  }

  Memory task_memory_indexed(const TaskSample& s, bool eval, std::size_t index) {
    EncoderState enc = seq2seq_->encode(clip(s.src));
    switch (cfg_.manner) {
      case Manner::none:
        return seq2seq_->build_memory(enc);
      case Manner::etc_pipeline: {
        std::vector<int> xc = pipeline_tokens(s, eval, index);
        EncoderState ce = seq2seq_->encode(xc, kAll, !cfg_.shared_encoder &&
                                                        seq2seq_->has_independent_encoder());
        CompressedRep rep{ce.h, ce.h.rows()};
        return seq2seq_->build_memory(enc, &rep);
      }
      case Manner::etc_joint: {
        JointCompressOut jo = joint_greedy_compress({clip(s.src)}, *comp_, cfg_.beam.gamma);
        return seq2seq_->build_memory(enc, &jo.reps[0]);
      }
      case Manner::itc_joint: {
        Tensor pf = itc_->predict_fertility(enc.h);
        std::vector<std::size_t> idx = select_top_k(pf.values(), cfg_.itc_gamma);
        Tensor hc = itc_->nat_decode(enc, idx);
        CompressedRep rep{hc, hc.rows()};
        return seq2seq_->build_memory(enc, &rep);
      }
    }
    throw std::logic_error("task_memory: bad manner");
  }

  std::vector<int> pipeline_tokens(const TaskSample& s, bool eval, std::size_t index) {
    const std::vector<std::vector<int>>& cache = eval ? comp_cache_test_ : comp_cache_train_;
    if (index != npos_index_ && index < cache.size() && !cache[index].empty())
      return cache[index];
    Rng rng(cfg_.seed ^ 0xfa11bacULL);
    const std::vector<int>& src = task_is_encoder_decoder(cfg_.task) ? s.src : s.passage;
    return compress_tokens(clip(src), rng);
  }

  Tensor clf_hidden(const TaskSample& s, const std::vector<int>& input) {
    return clf_hidden_indexed(s, input, npos_index_, true);
  }

  Tensor clf_hidden_indexed(const TaskSample& s, const std::vector<int>& input, std::size_t index,
                            bool eval) {
    EncoderState enc = clf_->encode(input);
    if (cfg_.fusion == FusionMode::none) return clf_->task_hidden(enc);
    CompressedRep rep;
    switch (cfg_.manner) {
      case Manner::etc_pipeline: {
        std::vector<int> xc = pipeline_tokens(s, eval, index);
        EncoderState ce = clf_->encode(xc);
        rep = CompressedRep{ce.h, ce.h.rows()};
        break;
      }
      case Manner::etc_joint: {
        JointCompressOut jo = joint_greedy_compress({clip(s.passage)}, *comp_, cfg_.beam.gamma);
        rep = jo.reps[0];
        break;
      }
      case Manner::itc_joint: {
        Tensor pf = itc_->predict_fertility(enc.h);
        std::vector<std::size_t> idx = select_top_k(pf.values(), cfg_.itc_gamma);
        Tensor hc = itc_->nat_decode(enc, idx);
        rep = CompressedRep{hc, hc.rows()};
        break;
      }
      default:
        throw std::logic_error("clf_hidden: bad manner");
    }
    return clf_->task_hidden(enc, &rep);
  }

  std::pair<std::vector<int>, std::pair<int, int>> span_io(const TaskSample& s) const {
    std::vector<int> input = build_span_input(s.passage, s.question, cfg_.model.max_len);
    std::pair<int, int> gold{0, 0};
    if (s.ans_start >= 0) {
      // positions shift by one for [CLS]; spans cut off by truncation count
      // as unanswerable
      std::size_t passage_kept = 0;
      for (std::size_t i = 1; i < input.size() && input[i] != special::kSep; ++i) ++passage_kept;
      if (static_cast<std::size_t>(s.ans_end) < passage_kept)
        gold = {s.ans_start + 1, s.ans_end + 1};
    }
    return {input, gold};
  }

  Tensor task_loss(const TaskSample& s, std::size_t index) {
    if (encoder_decoder_task()) {
      Memory mem = task_memory_indexed(s, false, index);
      Tensor loss = seq2seq_->teacher_loss(clip(s.tgt), mem);
      if (cfg_.manner == Manner::etc_joint && cfg_.joint_comp_weight > 0.0 &&
          !data_.comp_pairs.empty()) {
        const PairSample& cp = data_.comp_pairs[index % data_.comp_pairs.size()];
        Memory cm = comp_->build_memory(comp_->encode(clip(cp.src)));
        loss = add(loss, scale(comp_->teacher_loss(clip(cp.tgt), cm), cfg_.joint_comp_weight));
      }
      return loss;
    }
    if (cfg_.task == TaskKind::span) {
      auto [input, gold] = span_io(s);
      Tensor h = clf_hidden_indexed(s, input, index, false);
      auto [sl, el] = clf_->span_logits(h);
      Tensor ce = add(cross_entropy_rows(sl, {gold.first}), cross_entropy_rows(el, {gold.second}));
      Tensor verif =
          bce_with_logits(clf_->answerability_logit(h), {gold == std::pair<int, int>{0, 0} ? 0.0 : 1.0});
      return add(ce, scale(verif, 0.5));
    }
    std::vector<Tensor> hs;
    for (const auto& o : s.options)
      hs.push_back(clf_hidden_indexed(
          s, build_choice_input(s.passage, s.question, o, cfg_.model.max_len), index, false));
    return cross_entropy_rows(clf_->choice_logits(hs), {s.ans_choice});
  }

  void train_task(TrainResult& res, std::size_t resume_step) {
    NamedParams named = task_phase_params();
    std::vector<Tensor> params = values_of(named);
    BatchCursor cursor(data_.train.size(), cfg_.train.batch, cfg_.seed ^ 0x7a5c);
    cursor.seek(resume_step * cfg_.train.batch);
    set_training(true);
    for (std::size_t s = resume_step; s < cfg_.train.steps; ++s) {
      zero_grads(params);
      Tensor loss = Tensor::scalar(0.0);
      for (std::size_t i : cursor.next()) loss = add(loss, task_loss(data_.train[i], i));
      loss = scale(loss, 1.0 / static_cast<double>(cfg_.train.batch));
      backward(loss);
      adam_step(params, adam_, warmed(cfg_.train, s, cfg_.train.steps));
      task_step_ = s + 1;
      log_step(res, "task", s, loss.item());
      if (!cfg_.out_dir.empty() && cfg_.train.checkpoint_every &&
          task_step_ % cfg_.train.checkpoint_every == 0)
        save(step_checkpoint_path(task_step_));
    }
    set_training(false);
  }

  NamedParams task_phase_params() const {
    NamedParams named;
    if (seq2seq_) {
      NamedParams p = seq2seq_->named_params("task");
      named.insert(named.end(), p.begin(), p.end());
    }
    if (clf_) {
      NamedParams p = clf_->named_params("task");
      named.insert(named.end(), p.begin(), p.end());
    }
    if (cfg_.manner == Manner::etc_joint && comp_) {
      NamedParams p = comp_->named_params("comp");
      named.insert(named.end(), p.begin(), p.end());
    }
    if (cfg_.manner == Manner::itc_joint && itc_) {
      NamedParams p = itc_->named_params("itc");
      named.insert(named.end(), p.begin(), p.end());
    }
    return named;
  }

  void log_step(TrainResult& res, const char* phase, std::size_t step, double loss) {
    if (cfg_.train.log_every && step % cfg_.train.log_every == 0)
      res.log.push_back({phase, step, loss});
  }

  std::vector<int> clip(const std::vector<int>& ids) const {
    if (ids.size() + 2 <= cfg_.model.max_len) return ids;
    return std::vector<int>(ids.begin(),
                            ids.begin() + static_cast<long>(cfg_.model.max_len - 2));
  }

  std::string checkpoint_path() const {
    return (std::filesystem::path(cfg_.out_dir) / "checkpoint.tckp").string();
  }

  std::string step_checkpoint_path(std::size_t step) const {
    return (std::filesystem::path(cfg_.out_dir) /
            ("checkpoint_" + std::to_string(step) + ".tckp"))
        .string();
  }

  void write_artifacts(const TrainResult& res) {
    std::filesystem::create_directories(cfg_.out_dir);
    save(checkpoint_path());
    std::ofstream cfgs(std::filesystem::path(cfg_.out_dir) / "config_snapshot.cfg");
    cfgs << config_snapshot(cfg_);
    data_.vocab.save((std::filesystem::path(cfg_.out_dir) / "vocab.txt").string());
    std::ofstream log(std::filesystem::path(cfg_.out_dir) / "train_log.tsv");
    log << "phase\tstep\tloss\n";
    log.precision(17);
    for (const StepLog& l : res.log) log << l.phase << '\t' << l.step << '\t' << l.loss << '\n';
    std::ofstream met(std::filesystem::path(cfg_.out_dir) / "metrics.txt");
    met.precision(17);
    met << res.metric_name << " = " << res.metric << '\n';
  }

  static constexpr std::size_t npos_index_ = static_cast<std::size_t>(-1);

  RunConfig cfg_;
  TaskData data_;
  std::unique_ptr<Seq2Seq> seq2seq_;
  std::unique_ptr<EncoderClassifier> clf_;
  std::unique_ptr<Seq2Seq> comp_;
  std::unique_ptr<ItcModule> itc_;
  std::vector<std::vector<int>> comp_cache_train_, comp_cache_test_;
  AdamState adam_;
  std::size_t task_step_ = 0;
};

// ---------------------------------------------------------------------------
// sweeps and ablations

struct SweepRow {
  double gamma = 0.0;
  double metric = 0.0;
};

// Trains and evaluates one run per ratio, in grid order.
inline std::vector<SweepRow> run_sweep_gamma(const RunConfig& base, const TaskData& data,
                                             const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("sweep: empty gamma grid");
  for (double g : grid)
    if (!(g > 0.0 && g <= 1.0)) throw ConfigError("sweep: gamma values must be in (0,1]");
  std::vector<SweepRow> rows;
  for (double g : grid) {
    RunConfig cfg = base;
    cfg.beam.gamma = g;
    cfg.itc_gamma = g;
    cfg.out_dir.clear();
    Run run(cfg, data);
    TrainResult r = run.train();
    rows.push_back({g, r.metric});
  }
  return rows;
}

struct AblationRow {
  std::string name;
  std::vector<double> per_seed;
  double mean = 0.0;
};

// Table-shaped compression-quality comparison: an unaided baseline plus the
// alltext / f8w / randsample / trained-compressor variants, each trained
// from scratch per seed with the same schedule.
inline std::vector<AblationRow> run_ablation_quality(const RunConfig& base, const TaskData& data,
                                                     const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("ablation: need at least one seed");
  if (base.manner == Manner::none)
    throw ConfigError("ablation: configure the compression manner to ablate");
  struct Variant {
    std::string name;
    Manner manner;
    FusionMode fusion;
    CompressionSource source;
  };
  std::vector<Variant> variants{
      {"baseline", Manner::none, FusionMode::none, CompressionSource::trained},
      {"alltext", Manner::etc_pipeline, base.fusion, CompressionSource::alltext},
      {"f8w", Manner::etc_pipeline, base.fusion, CompressionSource::f8w},
      {"randsample", Manner::etc_pipeline, base.fusion, CompressionSource::randsample},
      {"trained", base.manner, base.fusion, CompressionSource::trained},
  };
  std::vector<AblationRow> rows;
  for (const Variant& v : variants) {
    AblationRow row;
    row.name = v.name;
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.seed = seed;
      cfg.manner = v.manner;
      cfg.fusion = v.fusion;
      cfg.comp_source = v.source;
      cfg.out_dir.clear();
      Run run(cfg, data);
      TrainResult r = run.train();
      row.per_seed.push_back(r.metric);
    }
    for (double m : row.per_seed) row.mean += m;
    row.mean /= static_cast<double>(row.per_seed.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string ablation_table(const std::vector<AblationRow>& rows,
                                  const std::string& metric_name) {
  std::ostringstream os;
  os << "variant";
  if (!rows.empty())
    for (std::size_t s = 0; s < rows[0].per_seed.size(); ++s) os << "\tseed" << s;
  os << "\tmean_" << metric_name << "\n";
  os.precision(6);
  os << std::fixed;
  for (const AblationRow& r : rows) {
    os << r.name;
    for (double m : r.per_seed) os << '\t' << m;
    os << '\t' << r.mean << '\n';
  }
  return os.str();
}

}  // namespace tcat
