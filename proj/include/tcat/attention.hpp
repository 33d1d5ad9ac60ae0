#pragma once

// Self-attention building blocks shared by the encoder, the decoders and the
// fusion layers: scaled dot-product attention, multi-head attention with
// per-head projections, the position-wise FFN, and the composite
// FFN(MultiHead(.)) + residual block.

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcat/optim.hpp"
#include "tcat/rng.hpp"
#include "tcat/special.hpp"
#include "tcat/tensor.hpp"

namespace tcat {

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t d_model = 128;
  std::size_t d_ff = 512;
  std::size_t heads = 4;
  std::size_t vocab_size = 0;
  std::size_t max_len = 256;
  bool pre_norm = false;          // normalization placement; post-norm by default
  bool scale_by_d_model = false;  // score divisor sqrt(d_model) instead of sqrt(d_k)
  double dropout = 0.0;
  double ln_eps = 1e-5;

  std::size_t d_k() const { return d_model / heads; }

  void validate() const {
    if (layers == 0 || d_model == 0 || d_ff == 0 || heads == 0)
      throw std::invalid_argument("ModelConfig: dimensions must be positive");
    if (d_model % heads != 0)
      throw std::invalid_argument("ModelConfig: d_model " + std::to_string(d_model) +
                                  " not divisible by heads " + std::to_string(heads));
    if (vocab_size < static_cast<std::size_t>(special::kReservedCount))
      throw std::invalid_argument("ModelConfig: vocab_size below reserved token count");
    if (max_len == 0) throw std::invalid_argument("ModelConfig: max_len must be positive");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("ModelConfig: dropout must be in [0,1)");
  }
};

// Per-forward context: dropout is active only while training.
struct ForwardCtx {
  const ModelConfig* cfg = nullptr;
  Rng* drop_rng = nullptr;
  bool training = false;

  Tensor drop(const Tensor& x) const {
    if (!training || cfg->dropout == 0.0) return x;
    return dropout(x, cfg->dropout, *drop_rng);
  }
};

// ---------------------------------------------------------------------------
// positional encoding

inline Tensor sinusoidal_table(std::size_t max_len, std::size_t d_model) {
  std::vector<double> t(max_len * d_model);
  for (std::size_t p = 0; p < max_len; ++p) {
    for (std::size_t i = 0; i < d_model; i += 2) {
      double rate = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d_model));
      double angle = static_cast<double>(p) * rate;
      t[p * d_model + i] = std::sin(angle);
      if (i + 1 < d_model) t[p * d_model + i + 1] = std::cos(angle);
    }
  }
  return Tensor::from_data({max_len, d_model}, std::move(t));
}

inline Tensor positional_encode(const Tensor& embeddings, const Tensor& table) {
  if (embeddings.ndim() != 2 || embeddings.cols() != table.cols())
    throw std::invalid_argument("positional_encode: width mismatch");
  if (embeddings.rows() > table.rows())
    throw std::length_error("positional_encode: sequence length " +
                            std::to_string(embeddings.rows()) + " exceeds max_len " +
                            std::to_string(table.rows()));
  return add(embeddings, slice_rows(table, 0, embeddings.rows()));
}

// ---------------------------------------------------------------------------
// scaled dot-product attention

struct AttnOut {
  Tensor out;
  std::vector<double> attn;  // row-stochastic weights, q_rows x k_rows
};

// Softmax(Q K^T / sqrt(width) + mask) V. Masked positions receive -inf
// before the softmax; a fully masked query row is a contract violation.
inline AttnOut self_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                              const AttnMask* mask = nullptr,
                              std::size_t scale_width = 0) {
  if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2)
    throw std::invalid_argument("self_attention: 2-d inputs required");
  if (q.cols() != k.cols())
    throw std::invalid_argument("self_attention: query/key width mismatch");
  if (k.rows() != v.rows())
    throw std::invalid_argument("self_attention: key/value row mismatch");
  if (scale_width == 0) scale_width = k.cols();
  Tensor scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(scale_width)));
  Tensor probs = softmax_rows(scores, mask);
  AttnOut r;
  r.attn = probs.values();
  r.out = matmul(probs, v);
  return r;
}

// ---------------------------------------------------------------------------
// multi-head attention

struct MhaParams {
  Tensor wq, wk, wv, wo;

  static MhaParams init(std::size_t d_model, Rng& rng) {
    MhaParams p;
    p.wq = Tensor::glorot(d_model, d_model, rng);
    p.wk = Tensor::glorot(d_model, d_model, rng);
    p.wv = Tensor::glorot(d_model, d_model, rng);
    p.wo = Tensor::glorot(d_model, d_model, rng);
    return p;
  }

  void collect(NamedParams& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".wq", wq);
    out.emplace_back(prefix + ".wk", wk);
    out.emplace_back(prefix + ".wv", wv);
    out.emplace_back(prefix + ".wo", wo);
  }
};

// Concat(head_1..head_H) W^O with per-head d_k = d_model / H projections.
// Also returns the head-averaged attention weights for coverage accounting.
inline AttnOut multi_head(const ModelConfig& cfg, const MhaParams& p, const Tensor& q,
                          const Tensor& k, const Tensor& v, const AttnMask* mask = nullptr) {
  const std::size_t d = cfg.d_model, h = cfg.heads, dk = cfg.d_k();
  if (q.cols() != d || k.cols() != d || v.cols() != d)
    throw std::invalid_argument("multi_head: input width must equal d_model");
  if (p.wq.rows() != d || p.wq.cols() != d || p.wo.rows() != d || p.wo.cols() != d)
    throw std::invalid_argument("multi_head: projection shape mismatch");
  Tensor qp = matmul(q, p.wq);
  Tensor kp = matmul(k, p.wk);
  Tensor vp = matmul(v, p.wv);
  const std::size_t scale_width = cfg.scale_by_d_model ? d : dk;
  std::vector<Tensor> heads;
  heads.reserve(h);
  std::vector<double> attn_mean(q.rows() * k.rows(), 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    AttnOut a = self_attention(slice_cols(qp, i * dk, dk), slice_cols(kp, i * dk, dk),
                               slice_cols(vp, i * dk, dk), mask, scale_width);
    for (std::size_t j = 0; j < attn_mean.size(); ++j)
      attn_mean[j] += a.attn[j] / static_cast<double>(h);
    heads.push_back(std::move(a.out));
  }
  AttnOut r;
  r.out = matmul(concat_cols(heads), p.wo);
  r.attn = std::move(attn_mean);
  return r;
}

// ---------------------------------------------------------------------------
// position-wise FFN and layer norm parameters

struct FfnParams {
  Tensor w1, b1, w2, b2;

  static FfnParams init(std::size_t d_model, std::size_t d_ff, Rng& rng) {
    FfnParams p;
    p.w1 = Tensor::glorot(d_model, d_ff, rng);
    p.b1 = Tensor::zeros({d_ff}, true);
    p.w2 = Tensor::glorot(d_ff, d_model, rng);
    p.b2 = Tensor::zeros({d_model}, true);
    return p;
  }

  void collect(NamedParams& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".w1", w1);
    out.emplace_back(prefix + ".b1", b1);
    out.emplace_back(prefix + ".w2", w2);
    out.emplace_back(prefix + ".b2", b2);
  }
};

inline Tensor ffn(const FfnParams& p, const Tensor& x) {
  Tensor h = gelu(add_row(matmul(x, p.w1), p.b1));
  return add_row(matmul(h, p.w2), p.b2);
}

struct LayerNormParams {
  Tensor gain, bias;

  static LayerNormParams init(std::size_t d) {
    LayerNormParams p;
    p.gain = Tensor::full({d}, 1.0, true);
    p.bias = Tensor::zeros({d}, true);
    return p;
  }

  void collect(NamedParams& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".gain", gain);
    out.emplace_back(prefix + ".bias", bias);
  }
};

inline Tensor norm(const ModelConfig& cfg, const LayerNormParams& p, const Tensor& x) {
  return layer_norm(x, p.gain, p.bias, cfg.ln_eps);
}

// ---------------------------------------------------------------------------
// composite blocks

// One encoder block: FFN(MultiHead(x, x, x)) with the residual back to x.
struct EncLayer {
  MhaParams attn;
  FfnParams ff;
  LayerNormParams ln;

  static EncLayer init(const ModelConfig& cfg, Rng& rng) {
    EncLayer l;
    l.attn = MhaParams::init(cfg.d_model, rng);
    l.ff = FfnParams::init(cfg.d_model, cfg.d_ff, rng);
    l.ln = LayerNormParams::init(cfg.d_model);
    return l;
  }

  void collect(NamedParams& out, const std::string& prefix) const {
    attn.collect(out, prefix + ".attn");
    ff.collect(out, prefix + ".ffn");
    ln.collect(out, prefix + ".ln");
  }

  Tensor forward(const ForwardCtx& ctx, const Tensor& x, const AttnMask* mask) const {
    const ModelConfig& cfg = *ctx.cfg;
    if (cfg.pre_norm) {
      Tensor h = norm(cfg, ln, x);
      Tensor a = multi_head(cfg, attn, h, h, h, mask).out;
      return add(x, ctx.drop(ffn(ff, a)));
    }
    Tensor a = multi_head(cfg, attn, x, x, x, mask).out;
    return norm(cfg, ln, add(ctx.drop(ffn(ff, a)), x));
  }
};

// Cross-attention context: FFN(MultiHead(query, mem, mem)), no residual.
// The residual to the decoder state is added by the caller.
struct CrossBlock {
  MhaParams attn;
  FfnParams ff;

  static CrossBlock init(const ModelConfig& cfg, Rng& rng) {
    CrossBlock b;
    b.attn = MhaParams::init(cfg.d_model, rng);
    b.ff = FfnParams::init(cfg.d_model, cfg.d_ff, rng);
    return b;
  }

  void collect(NamedParams& out, const std::string& prefix) const {
    attn.collect(out, prefix + ".attn");
    ff.collect(out, prefix + ".ffn");
  }

  AttnOut forward(const ForwardCtx& ctx, const Tensor& query, const Tensor& mem,
                  std::size_t mem_valid) const {
    AttnMask mask = AttnMask::key_prefix(mem.rows(), mem_valid);
    AttnOut a = multi_head(*ctx.cfg, attn, query, mem, mem, &mask);
    a.out = ctx.drop(ffn(ff, a.out));
    return a;
  }
};

}  // namespace tcat
