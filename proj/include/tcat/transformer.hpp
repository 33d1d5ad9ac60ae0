#pragma once

// The SAN encoder and autoregressive decoder shared by the compression
// models and every downstream task head, plus the fused variants: the
// decoder can carry an extra gated attention branch over a compressed
// memory (BDF) or over the BEF-fused source representation (BBF).

#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcat/attention.hpp"
#include "tcat/fusion.hpp"

namespace tcat {

constexpr std::size_t kAll = std::numeric_limits<std::size_t>::max();

// Final source representation H_x plus the pieces later stages need: the
// input representations v (embedding + position) and the padding extent.
struct EncoderState {
  Tensor h;
  Tensor v;
  std::vector<int> ids;
  std::size_t valid = 0;
};

// A compressed memory: hidden vectors with a valid-row prefix; rows past
// `valid` are masked out of every downstream attention.
struct CompressedRep {
  Tensor h;
  std::size_t valid = 0;
};

// What the decoder attends to. `mem` feeds the original cross-attention
// context; `aux`, when present, feeds the gated fusion branch.
struct Memory {
  Tensor mem;
  std::size_t mem_valid = 0;
  Tensor aux;
  std::size_t aux_valid = 0;

  bool has_aux() const { return aux.defined(); }
};

struct DecLayer {
  MhaParams self_attn;
  FfnParams self_ff;
  LayerNormParams self_ln;
  CrossBlock cross;
  std::optional<FusionCross> fuse;
  LayerNormParams out_ln;

  static DecLayer init(const ModelConfig& cfg, bool gated_fusion, Rng& rng) {
    DecLayer l;
    l.self_attn = MhaParams::init(cfg.d_model, rng);
    l.self_ff = FfnParams::init(cfg.d_model, cfg.d_ff, rng);
    l.self_ln = LayerNormParams::init(cfg.d_model);
    l.cross = CrossBlock::init(cfg, rng);
    if (gated_fusion) l.fuse = FusionCross::init(cfg, rng);
    l.out_ln = LayerNormParams::init(cfg.d_model);
    return l;
  }

  void collect(NamedParams& out, const std::string& prefix) const {
    self_attn.collect(out, prefix + ".self_attn");
    self_ff.collect(out, prefix + ".self_ffn");
    self_ln.collect(out, prefix + ".self_ln");
    cross.collect(out, prefix + ".cross");
    if (fuse) fuse->collect(out, prefix + ".fuse");
    out_ln.collect(out, prefix + ".out_ln");
  }
};

struct DecLayerOut {
  Tensor h;
  Tensor context;                 // c_i rows (after fusion gate if present)
  std::vector<double> cross_attn; // head-mean weights of the original branch
};

struct DecodeFlags {
  bool detach_inputs = false;  // cut the argmax token path (joint compression)
  bool detach_cross = false;   // cut gradient into cross-attention context
};

inline DecLayerOut dec_layer_forward(const ForwardCtx& ctx, const DecLayer& l, const Tensor& x,
                                     const Memory& mem, const DecodeFlags& flags) {
  const ModelConfig& cfg = *ctx.cfg;
  AttnMask causal = AttnMask::causal(x.rows());
  Tensor h_tgt;
  if (cfg.pre_norm) {
    Tensor hn = norm(cfg, l.self_ln, x);
    h_tgt = add(x, ctx.drop(ffn(l.self_ff, multi_head(cfg, l.self_attn, hn, hn, hn, &causal).out)));
  } else {
    Tensor a = multi_head(cfg, l.self_attn, x, x, x, &causal).out;
    h_tgt = norm(cfg, l.self_ln, add(ctx.drop(ffn(l.self_ff, a)), x));
  }
  Tensor q = cfg.pre_norm ? norm(cfg, l.out_ln, h_tgt) : h_tgt;
  AttnOut ca = l.cross.forward(ctx, q, mem.mem, mem.mem_valid);
  Tensor c = ca.out;
  if (l.fuse) {
    if (!mem.has_aux())
      throw std::invalid_argument("decoder: gated fusion layer needs an aux memory");
    c = fused_context(ctx, *l.fuse, c, q, mem.aux, mem.aux_valid);
  }
  if (flags.detach_cross) c = detach(c);
  Tensor o = cfg.pre_norm ? add(h_tgt, c) : norm(cfg, l.out_ln, add(c, h_tgt));
  DecLayerOut out;
  out.h = std::move(o);
  out.context = std::move(c);
  out.cross_attn = std::move(ca.attn);
  return out;
}

struct DecOut {
  Tensor h;                        // T x d_model hidden states (o_i rows)
  Tensor context;                  // last layer's context rows
  std::vector<double> cross_attn;  // last layer's T x J attention
};

struct StepOut {
  Tensor c;                      // context vector c_i (1 x d_model)
  Tensor o;                      // fused output o_i (1 x d_model)
  Tensor dist;                   // next-token distribution (1 x vocab)
  std::vector<double> attn_row;  // cross-attention row p_{i,.} over source
};

// ---------------------------------------------------------------------------

class Seq2Seq {
 public:
  Seq2Seq(const ModelConfig& cfg, FusionMode fusion, Rng& rng, bool independent_encoder = false)
      : cfg_(cfg), fusion_(fusion), drop_rng_(rng.split(0x5eed)) {
    cfg_.validate();
    // unit-scale embeddings keep token identity comparable to the O(1)
    // sinusoidal position signal
    embedding_ = Tensor::randn({cfg_.vocab_size, cfg_.d_model}, rng, 1.0);
    pos_ = sinusoidal_table(cfg_.max_len, cfg_.d_model);
    for (std::size_t i = 0; i < cfg_.layers; ++i) enc_.push_back(EncLayer::init(cfg_, rng));
    if (independent_encoder)
      for (std::size_t i = 0; i < cfg_.layers; ++i) enc2_.push_back(EncLayer::init(cfg_, rng));
    if (fusion_uses_encoder_side(fusion_)) bef_ = FusionBlock::init(cfg_, rng);
    const bool gated = fusion_uses_decoder_gate(fusion_);
    for (std::size_t i = 0; i < cfg_.layers; ++i)
      dec_.push_back(DecLayer::init(cfg_, gated, rng));
    enc_final_ln_ = LayerNormParams::init(cfg_.d_model);
    dec_final_ln_ = LayerNormParams::init(cfg_.d_model);
    lw_ = Tensor::glorot(cfg_.d_model, cfg_.d_model, rng);
    lw_b_ = Tensor::zeros({cfg_.d_model}, true);
    lo_ = Tensor::glorot(cfg_.d_model, cfg_.vocab_size, rng);
    lo_b_ = Tensor::zeros({cfg_.vocab_size}, true);
  }

  const ModelConfig& config() const { return cfg_; }
  FusionMode fusion() const { return fusion_; }
  bool has_independent_encoder() const { return !enc2_.empty(); }

  void set_training(bool on) { training_ = on; }

  ForwardCtx fwd_ctx() const { return ForwardCtx{&cfg_, &drop_rng_, training_}; }

  // --- encoder ---------------------------------------------------------

  EncoderState encode(const std::vector<int>& ids, std::size_t valid = kAll,
                      bool independent = false) const {
    if (ids.empty()) throw std::invalid_argument("encode: empty input");
    if (valid == kAll) valid = ids.size();
    if (valid == 0 || valid > ids.size())
      throw std::invalid_argument("encode: invalid padding extent");
    const auto& layers = independent ? enc2_ : enc_;
    if (independent && enc2_.empty())
      throw std::invalid_argument("encode: model has no independent encoder");
    ForwardCtx ctx = fwd_ctx();
    Tensor x = positional_encode(gather_rows(embedding_, ids), pos_);
    EncoderState st;
    st.v = x;
    AttnMask pad = AttnMask::key_prefix(ids.size(), valid);
    const AttnMask* mask = valid < ids.size() ? &pad : nullptr;
    for (const auto& l : layers) x = l.forward(ctx, x, mask);
    if (cfg_.pre_norm) x = norm(cfg_, enc_final_ln_, x);
    st.h = std::move(x);
    st.ids = ids;
    st.valid = valid;
    return st;
  }

  // Assembles the decoder memory for this model's fusion mode. Modes other
  // than `none` require a compressed representation.
  Memory build_memory(const EncoderState& enc, const CompressedRep* comp = nullptr) const {
    Memory m;
    switch (fusion_) {
      case FusionMode::none:
        m.mem = enc.h;
        m.mem_valid = enc.valid;
        return m;
      case FusionMode::bef: {
        require_comp(comp);
        m.mem = fuse_bef(fwd_ctx(), *bef_, enc.h, comp->h, comp->valid);
        m.mem_valid = enc.valid;
        return m;
      }
      case FusionMode::bdf: {
        require_comp(comp);
        m.mem = enc.h;
        m.mem_valid = enc.valid;
        m.aux = comp->h;
        m.aux_valid = comp->valid;
        return m;
      }
      case FusionMode::bbf: {
        require_comp(comp);
        m.mem = enc.h;
        m.mem_valid = enc.valid;
        m.aux = fuse_bef(fwd_ctx(), *bef_, enc.h, comp->h, comp->valid);
        m.aux_valid = enc.valid;
        return m;
      }
    }
    throw std::logic_error("build_memory: bad fusion mode");
  }

  // --- decoder ---------------------------------------------------------

  DecOut decode_hidden(const std::vector<int>& prefix, const Memory& mem,
                       const DecodeFlags& flags = {}) const {
    if (prefix.empty() || prefix[0] != special::kBos)
      throw std::invalid_argument("decode: prefix must be nonempty and begin with BOS");
    if (prefix.size() > cfg_.max_len)
      throw std::length_error("decode: prefix exceeds max_len");
    ++decoder_passes_;
    ForwardCtx ctx = fwd_ctx();
    Tensor emb = gather_rows(embedding_, prefix);
    if (flags.detach_inputs) emb = detach(emb);
    Tensor x = positional_encode(emb, pos_);
    DecLayerOut last;
    for (const auto& l : dec_) {
      last = dec_layer_forward(ctx, l, x, mem, flags);
      x = last.h;
    }
    DecOut out;
    out.h = cfg_.pre_norm ? norm(cfg_, dec_final_ln_, x) : x;
    out.context = last.context;
    out.cross_attn = std::move(last.cross_attn);
    return out;
  }

  // Softmax(L_o GeLU(L_w o_i)) without the softmax: raw vocabulary logits.
  Tensor hidden_to_logits(const Tensor& h) const {
    return add_row(matmul(gelu(add_row(matmul(h, lw_), lw_b_)), lo_), lo_b_);
  }

  Tensor decode_logits(const std::vector<int>& prefix, const Memory& mem,
                       const DecodeFlags& flags = {}) const {
    return hidden_to_logits(decode_hidden(prefix, mem, flags).h);
  }

  StepOut decode_step(const std::vector<int>& prefix, const Memory& mem) const {
    DecOut d = decode_hidden(prefix, mem);
    const std::size_t last = d.h.rows() - 1;
    StepOut s;
    s.o = slice_rows(d.h, last, 1);
    s.c = slice_rows(d.context, last, 1);
    s.dist = softmax_rows(hidden_to_logits(s.o));
    const std::size_t j = mem.mem.rows();
    s.attn_row.assign(d.cross_attn.begin() + last * j, d.cross_attn.begin() + (last + 1) * j);
    return s;
  }

  // Teacher-forced mean NLL of `target` (BOS prepended, EOS appended).
  Tensor teacher_loss(const std::vector<int>& target, const Memory& mem,
                      const DecodeFlags& flags = {}) const {
    if (target.empty()) throw std::invalid_argument("teacher_loss: empty target");
    std::vector<int> input{special::kBos};
    input.insert(input.end(), target.begin(), target.end());
    std::vector<int> labels(target);
    labels.push_back(special::kEos);
    return cross_entropy_rows(decode_logits(input, mem, flags), labels);
  }

  // Greedy decode until EOS or max_steps tokens; special marks other than
  // EOS are never emitted, and EOS is suppressed below min_len.
  std::vector<int> greedy_decode(const Memory& mem, std::size_t max_steps,
                                 std::size_t min_len = 1) const {
    NoGradGuard ng;
    std::vector<int> prefix{special::kBos};
    std::vector<int> out;
    for (std::size_t t = 0; t < max_steps; ++t) {
      StepOut s = decode_step(prefix, mem);
      int tok = pick_token(s.dist, out.size() >= min_len);
      if (tok == special::kEos) break;
      out.push_back(tok);
      prefix.push_back(tok);
    }
    return out;
  }

  // --- parameters ------------------------------------------------------

  NamedParams named_params(const std::string& prefix = "model") const {
    NamedParams out;
    out.emplace_back(prefix + ".emb", embedding_);
    for (std::size_t i = 0; i < enc_.size(); ++i)
      enc_[i].collect(out, prefix + ".enc." + std::to_string(i));
    for (std::size_t i = 0; i < enc2_.size(); ++i)
      enc2_[i].collect(out, prefix + ".enc2." + std::to_string(i));
    if (bef_) bef_->collect(out, prefix + ".bef");
    for (std::size_t i = 0; i < dec_.size(); ++i)
      dec_[i].collect(out, prefix + ".dec." + std::to_string(i));
    enc_final_ln_.collect(out, prefix + ".enc_final_ln");
    dec_final_ln_.collect(out, prefix + ".dec_final_ln");
    out.emplace_back(prefix + ".head.lw", lw_);
    out.emplace_back(prefix + ".head.lw_b", lw_b_);
    out.emplace_back(prefix + ".head.lo", lo_);
    out.emplace_back(prefix + ".head.lo_b", lo_b_);
    return out;
  }

  // Zeroes fusion output projections and saturates the gates so every
  // fusion mode computes exactly the unfused baseline.
  void make_fusion_identity() {
    if (bef_) neutralize_fusion_block(*bef_);
    for (auto& l : dec_)
      if (l.fuse) neutralize_fusion_cross(*l.fuse);
  }

  // decoder forward invocations (one per decode_hidden call)
  std::size_t decoder_passes() const { return decoder_passes_; }
  void reset_counters() const { decoder_passes_ = 0; }

  // exposed for tests and fusion surgery
  std::optional<FusionBlock>& bef() { return bef_; }
  std::vector<DecLayer>& dec_layers() { return dec_; }
  std::vector<EncLayer>& enc_layers() { return enc_; }
  const Tensor& embedding() const { return embedding_; }
  const Tensor& pos_table() const { return pos_; }

 private:
  static void require_comp(const CompressedRep* comp) {
    if (!comp || !comp->h.defined() || comp->valid == 0)
      throw std::invalid_argument("build_memory: fusion mode requires a compressed representation");
  }

  int pick_token(const Tensor& dist, bool allow_eos) const {
    const auto& v = dist.values();
    int best = -1;
    double best_p = -1.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      int tok = static_cast<int>(j);
      if (tok == special::kPad || tok == special::kBos || tok == special::kCls ||
          tok == special::kSep)
        continue;
      if (tok == special::kEos && !allow_eos) continue;
      if (v[j] > best_p) {
        best_p = v[j];
        best = tok;
      }
    }
    return best;
  }

  ModelConfig cfg_;
  FusionMode fusion_;
  Tensor embedding_, pos_;
  std::vector<EncLayer> enc_, enc2_;
  std::optional<FusionBlock> bef_;
  std::vector<DecLayer> dec_;
  LayerNormParams enc_final_ln_, dec_final_ln_;
  Tensor lw_, lw_b_, lo_, lo_b_;
  bool training_ = false;
  mutable Rng drop_rng_;
  mutable std::size_t decoder_passes_ = 0;
};

// Copies values for every name present in both lists (used to give a fused
// model the exact weights of a baseline).
inline void copy_matching_params(NamedParams& dst, const NamedParams& src) {
  for (auto& [name, t] : dst) {
    for (const auto& [sname, st] : src) {
      if (sname == name) {
        if (st.shape() != t.shape())
          throw std::invalid_argument("copy_matching_params: shape mismatch for " + name);
        t.mutable_values() = st.values();
        break;
      }
    }
  }
}

}  // namespace tcat
