#pragma once

// Backbone fusion: encoder-side fusion of compressed representations (BEF),
// the gated decoder-side context fusion (BDF), and their both-side
// combination (BBF). The decoder wires these blocks in per layer; they are
// agnostic to whether the compressed memory came from re-encoded tokens, the
// compression decoder's hidden states, or the non-autoregressive module.

#include <optional>
#include <stdexcept>
#include <string>

#include "tcat/attention.hpp"

namespace tcat {

enum class FusionMode { none, bef, bdf, bbf };

inline const char* fusion_name(FusionMode m) {
  switch (m) {
    case FusionMode::none: return "none";
    case FusionMode::bef: return "bef";
    case FusionMode::bdf: return "bdf";
    case FusionMode::bbf: return "bbf";
  }
  return "?";
}

inline FusionMode parse_fusion(const std::string& s) {
  if (s == "none") return FusionMode::none;
  if (s == "bef") return FusionMode::bef;
  if (s == "bdf") return FusionMode::bdf;
  if (s == "bbf") return FusionMode::bbf;
  throw std::invalid_argument("unknown fusion mode: " + s);
}

// Does this mode add a gated second context inside the decoder?
inline bool fusion_uses_decoder_gate(FusionMode m) {
  return m == FusionMode::bdf || m == FusionMode::bbf;
}

// Does this mode fuse on the encoder side?
inline bool fusion_uses_encoder_side(FusionMode m) {
  return m == FusionMode::bef || m == FusionMode::bbf;
}

// ---------------------------------------------------------------------------
// context gate

struct GateParams {
  Tensor w;  // 2d x d
  Tensor b;  // d

  static GateParams init(std::size_t d, Rng& rng) {
    GateParams g;
    g.w = Tensor::glorot(2 * d, d, rng);
    g.b = Tensor::zeros({d}, true);
    return g;
  }

  void collect(NamedParams& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
  }
};

// g = sigmoid(W [c; b] + bias); result = g (*) c + (1 - g) (*) b, per
// dimension. With c == b any gate returns c unchanged.
inline Tensor context_gate(const GateParams& p, const Tensor& c, const Tensor& b) {
  if (c.shape() != b.shape())
    throw std::invalid_argument("context_gate: context width mismatch");
  Tensor g = sigmoid(add_row(matmul(concat_cols({c, b}), p.w), p.b));
  return add(hadamard(g, c), hadamard(affine(g, -1.0, 1.0), b));
}

// ---------------------------------------------------------------------------
// encoder-side fusion (BEF)

struct FusionBlock {
  MhaParams attn;
  FfnParams ff;

  static FusionBlock init(const ModelConfig& cfg, Rng& rng) {
    FusionBlock b;
    b.attn = MhaParams::init(cfg.d_model, rng);
    b.ff = FfnParams::init(cfg.d_model, cfg.d_ff, rng);
    return b;
  }

  void collect(NamedParams& out, const std::string& prefix) const {
    attn.collect(out, prefix + ".attn");
    ff.collect(out, prefix + ".ffn");
  }
};

// H_x' = H_x + FFN(MultiHead(H_x, H_c, H_c)); the shape of H_x is preserved.
inline Tensor fuse_bef(const ForwardCtx& ctx, const FusionBlock& block, const Tensor& hx,
                       const Tensor& hc, std::size_t hc_valid) {
  if (hx.cols() != hc.cols())
    throw std::invalid_argument("fuse_bef: width mismatch " + shape_str(hx.shape()) + " vs " +
                                shape_str(hc.shape()));
  if (hx.rows() == 0 || hc.rows() == 0 || hc_valid == 0)
    throw std::invalid_argument("fuse_bef: empty representation");
  AttnMask mask = AttnMask::key_prefix(hc.rows(), hc_valid);
  Tensor att = multi_head(*ctx.cfg, block.attn, hx, hc, hc, &mask).out;
  return add(hx, ctx.drop(ffn(block.ff, att)));
}

// ---------------------------------------------------------------------------
// decoder-side fusion (BDF / BBF)

struct FusionCross {
  MhaParams attn;
  FfnParams ff;
  GateParams gate;

  static FusionCross init(const ModelConfig& cfg, Rng& rng) {
    FusionCross f;
    f.attn = MhaParams::init(cfg.d_model, rng);
    f.ff = FfnParams::init(cfg.d_model, cfg.d_ff, rng);
    f.gate = GateParams::init(cfg.d_model, rng);
    return f;
  }

  void collect(NamedParams& out, const std::string& prefix) const {
    attn.collect(out, prefix + ".attn");
    ff.collect(out, prefix + ".ffn");
    gate.collect(out, prefix + ".gate");
  }
};

// b_i = FFN(MultiHead(H_tgt, aux, aux)); c_i' = gate(c_i, b_i). BDF passes
// the compressed memory as aux, BBF passes the BEF-fused source memory.
inline Tensor fused_context(const ForwardCtx& ctx, const FusionCross& f, const Tensor& c,
                            const Tensor& h_tgt, const Tensor& aux, std::size_t aux_valid) {
  AttnMask mask = AttnMask::key_prefix(aux.rows(), aux_valid);
  Tensor b = ctx.drop(ffn(f.ff, multi_head(*ctx.cfg, f.attn, h_tgt, aux, aux, &mask).out));
  return context_gate(f.gate, c, b);
}

// Decoder-side fusion over the compressed representation H_c.
inline Tensor decoder_context_bdf(const ForwardCtx& ctx, const CrossBlock& cross,
                                  const FusionCross& f, const Tensor& h_tgt, const Tensor& hx,
                                  const Tensor& hc, std::size_t hc_valid) {
  Tensor c = cross.forward(ctx, h_tgt, hx, hx.rows()).out;
  return fused_context(ctx, f, c, h_tgt, hc, hc_valid);
}

// Both-side fusion: the second attention runs over the BEF-fused H_x'.
inline Tensor decoder_context_bbf(const ForwardCtx& ctx, const CrossBlock& cross,
                                  const FusionCross& f, const Tensor& h_tgt, const Tensor& hx,
                                  const Tensor& hx_fused) {
  Tensor c = cross.forward(ctx, h_tgt, hx, hx.rows()).out;
  return fused_context(ctx, f, c, h_tgt, hx_fused, hx_fused.rows());
}

// Turns every fusion addition into an exact no-op: the fusion FFN output
// projections are zeroed and the gate is saturated toward the original
// context (the sigmoid evaluates to exactly 1.0 at this bias), so fused and
// unfused paths produce identical values bit for bit.
inline void neutralize_fusion_block(FusionBlock& b) {
  std::fill(b.ff.w2.mutable_values().begin(), b.ff.w2.mutable_values().end(), 0.0);
  std::fill(b.ff.b2.mutable_values().begin(), b.ff.b2.mutable_values().end(), 0.0);
}

inline void neutralize_fusion_cross(FusionCross& f) {
  std::fill(f.ff.w2.mutable_values().begin(), f.ff.w2.mutable_values().end(), 0.0);
  std::fill(f.ff.b2.mutable_values().begin(), f.ff.b2.mutable_values().end(), 0.0);
  std::fill(f.gate.w.mutable_values().begin(), f.gate.w.mutable_values().end(), 0.0);
  std::fill(f.gate.b.mutable_values().begin(), f.gate.b.mutable_values().end(), 40.0);
}

}  // namespace tcat
