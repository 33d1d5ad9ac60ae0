#pragma once

// Explicit text compression: a seq2seq compressor decoded with
// ratio-capped beam search (pipeline mode) or batched greedy decoding that
// hands its decoder hidden states to the downstream model (joint mode),
// plus the trivial compression baselines used for ablations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tcat/transformer.hpp"

namespace tcat {

struct BeamConfig {
  std::size_t beam_size = 5;
  double alpha = 0.5;  // length normalization strength
  double beta = 0.2;   // coverage penalty strength
  double gamma = 0.6;  // compression ratio in (0, 1]
  std::size_t min_len = 1;

  void validate() const {
    if (beam_size < 1) throw std::invalid_argument("BeamConfig: beam_size must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw std::invalid_argument("BeamConfig: gamma must be in (0,1]");
    if (alpha < 0.0 || beta < 0.0)
      throw std::invalid_argument("BeamConfig: alpha and beta must be >= 0");
    if (min_len < 1) throw std::invalid_argument("BeamConfig: min_len must be >= 1");
  }
};

struct BeamHypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;
  std::vector<double> attn_mass;  // per source token: sum of p_{i,j} over generated steps
  bool finished = false;
};

// Hard decode cap: compression may never exceed ceil(gamma |x|), floor 1.
inline std::size_t compression_cap(std::size_t src_len, double gamma) {
  if (src_len == 0) throw std::invalid_argument("compression_cap: empty source");
  double c = std::ceil(gamma * static_cast<double>(src_len));
  return std::max<std::size_t>(1, static_cast<std::size_t>(c));
}

// (5 + |x_c|)^alpha / (5 + 1)^alpha
inline double len_norm(std::size_t length, double alpha) {
  if (length < 1) throw std::invalid_argument("len_norm: length must be >= 1");
  return std::pow(5.0 + static_cast<double>(length), alpha) / std::pow(6.0, alpha);
}

// beta * sum_i log(min(mass_i, 1)); the floor keeps untouched source tokens
// from driving the penalty to -inf.
inline double coverage_penalty(const std::vector<double>& attn_mass, double beta) {
  if (beta == 0.0) return 0.0;
  constexpr double kFloor = 1e-10;
  double s = 0.0;
  for (double m : attn_mass) {
    if (m < 0.0) throw std::invalid_argument("coverage_penalty: negative attention mass");
    s += std::log(std::min(std::max(m, kFloor), 1.0));
  }
  return beta * s;
}

// log P(x_c | x) / LenNorm(x_c) + cp(x; x_c)
inline double hypothesis_score(const BeamHypothesis& h, const BeamConfig& cfg) {
  if (h.tokens.empty()) throw std::invalid_argument("hypothesis_score: empty hypothesis");
  return h.log_prob / len_norm(h.tokens.size(), cfg.alpha) +
         coverage_penalty(h.attn_mass, cfg.beta);
}

namespace etc_detail {

// compressions emit lexical tokens only; marks and UNK never appear
inline bool emit_allowed(int tok, bool allow_eos) {
  if (tok == special::kEos) return allow_eos;
  return tok >= special::kReservedCount;
}

}  // namespace etc_detail

// Ratio-capped beam search. Candidates are pruned by cumulative
// log-probability, a hypothesis completes on EOS or when it reaches the cap,
// and the completed pool is ranked by hypothesis_score.
inline std::vector<int> beam_search_compress(const std::vector<int>& x, const Seq2Seq& model,
                                             const BeamConfig& cfg) {
  cfg.validate();
  if (x.empty()) throw std::invalid_argument("beam_search_compress: empty input");
  NoGradGuard ng;
  const std::size_t cap = compression_cap(x.size(), cfg.gamma);
  EncoderState enc = model.encode(x);
  Memory mem = model.build_memory(enc);

  std::vector<BeamHypothesis> alive(1);
  alive[0].attn_mass.assign(x.size(), 0.0);
  std::vector<BeamHypothesis> pool;

  for (std::size_t step = 0; step < cap && !alive.empty(); ++step) {
    struct Cand {
      std::size_t src;
      int tok;
      double log_prob;
    };
    std::vector<Cand> cands;
    std::vector<StepOut> steps(alive.size());
    for (std::size_t a = 0; a < alive.size(); ++a) {
      std::vector<int> prefix{special::kBos};
      prefix.insert(prefix.end(), alive[a].tokens.begin(), alive[a].tokens.end());
      steps[a] = model.decode_step(prefix, mem);
      const auto& p = steps[a].dist.values();
      const bool allow_eos = alive[a].tokens.size() >= cfg.min_len;
      for (std::size_t t = 0; t < p.size(); ++t) {
        int tok = static_cast<int>(t);
        if (!etc_detail::emit_allowed(tok, allow_eos)) continue;
        cands.push_back({a, tok, alive[a].log_prob + std::log(std::max(p[t], 1e-300))});
      }
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& l, const Cand& r) { return l.log_prob > r.log_prob; });
    if (cands.size() > cfg.beam_size) cands.resize(cfg.beam_size);

    std::vector<BeamHypothesis> next;
    for (const Cand& c : cands) {
      BeamHypothesis h = alive[c.src];
      h.log_prob = c.log_prob;
      if (c.tok == special::kEos) {
        h.finished = true;
        pool.push_back(std::move(h));
      } else {
        h.tokens.push_back(c.tok);
        for (std::size_t i = 0; i < x.size(); ++i) h.attn_mass[i] += steps[c.src].attn_row[i];
        next.push_back(std::move(h));
      }
    }
    alive = std::move(next);
  }
  // cap reached: force-complete whatever is still alive
  for (auto& h : alive) {
    h.finished = true;
    pool.push_back(std::move(h));
  }
  if (pool.empty()) throw std::logic_error("beam_search_compress: empty hypothesis pool");

  std::size_t best = 0;
  double best_score = hypothesis_score(pool[0], cfg);
  for (std::size_t i = 1; i < pool.size(); ++i) {
    double s = hypothesis_score(pool[i], cfg);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return pool[best].tokens;
}

// ---------------------------------------------------------------------------
// joint greedy compression (ETC Joint)

struct JointCompressOut {
  std::vector<CompressedRep> reps;        // decoder hidden states, batch-cap rows each
  std::vector<std::vector<int>> tokens;   // greedy token sequences (diagnostics)
};

// Greedy-decodes every sequence to the batch-max cap and returns the decoder
// hidden vectors as compressed features. Representations are masked to each
// sequence's own cap. Gradient is deliberately narrow: encoder memory,
// cross-attention context and selected-token embeddings are detached, so
// only the compression decoder's self-attention path trains through the
// returned features.
inline JointCompressOut joint_greedy_compress(const std::vector<std::vector<int>>& batch,
                                              const Seq2Seq& model, double gamma) {
  if (batch.empty()) throw std::invalid_argument("joint_greedy_compress: empty batch");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("joint_greedy_compress: gamma must be in (0,1]");
  std::size_t batch_cap = 0;
  std::vector<std::size_t> caps(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    caps[s] = compression_cap(batch[s].size(), gamma);
    batch_cap = std::max(batch_cap, caps[s]);
  }

  JointCompressOut out;
  out.reps.resize(batch.size());
  out.tokens.resize(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    EncoderState enc = model.encode(batch[s]);
    Memory mem;
    mem.mem = detach(enc.h);
    mem.mem_valid = enc.valid;

    std::vector<int> toks;
    {
      NoGradGuard ng;
      std::vector<int> prefix{special::kBos};
      for (std::size_t t = 0; t < batch_cap; ++t) {
        StepOut st = model.decode_step(prefix, mem);
        const auto& p = st.dist.values();
        int best = -1;
        double best_p = -1.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
          if (!etc_detail::emit_allowed(static_cast<int>(j), false)) continue;
          if (p[j] > best_p) {
            best_p = p[j];
            best = static_cast<int>(j);
          }
        }
        toks.push_back(best);
        prefix.push_back(best);
      }
    }
    std::vector<int> dec_in{special::kBos};
    dec_in.insert(dec_in.end(), toks.begin(), toks.end() - 1);
    DecodeFlags flags;
    flags.detach_inputs = true;
    flags.detach_cross = true;
    DecOut d = model.decode_hidden(dec_in, mem, flags);
    out.reps[s] = CompressedRep{d.h, caps[s]};
    out.tokens[s] = std::move(toks);
  }
  return out;
}

// ---------------------------------------------------------------------------
// compression-quality baselines

enum class BaselineMode { alltext, f8w, randsample };

inline BaselineMode parse_baseline(const std::string& s) {
  if (s == "alltext") return BaselineMode::alltext;
  if (s == "f8w") return BaselineMode::f8w;
  if (s == "randsample") return BaselineMode::randsample;
  throw std::invalid_argument("unknown baseline mode: " + s);
}

inline std::vector<int> baseline_compress(const std::vector<int>& x, BaselineMode mode,
                                          double gamma, Rng& rng) {
  if (x.empty()) throw std::invalid_argument("baseline_compress: empty input");
  switch (mode) {
    case BaselineMode::alltext: return x;
    case BaselineMode::f8w: {
      std::vector<int> out(x.begin(), x.begin() + std::min<std::size_t>(8, x.size()));
      return out;
    }
    case BaselineMode::randsample: {
      const std::size_t k = compression_cap(x.size(), gamma);
      std::vector<std::size_t> idx(x.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      rng.shuffle(idx);
      idx.resize(std::min(k, idx.size()));
      std::sort(idx.begin(), idx.end());
      std::vector<int> out;
      out.reserve(idx.size());
      for (std::size_t i : idx) out.push_back(x[i]);
      return out;
    }
  }
  throw std::logic_error("baseline_compress: bad mode");
}

}  // namespace tcat
