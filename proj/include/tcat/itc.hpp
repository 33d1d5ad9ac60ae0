#pragma once

// Implicit text compression: a per-token fertility predictor over the
// encoder output, hard top-K selection of source positions, and a
// non-autoregressive decoder that turns the selected input copies into
// compressed feature vectors in a single forward pass. An optional
// predictor head exposes explicit compression likelihoods for pretraining.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tcat/etc.hpp"
#include "tcat/transformer.hpp"

namespace tcat {

struct ItcConfig {
  double gamma = 0.4;
  ModelConfig nat;            // NAT decoder dims; vocab is the predictor's target space
  std::size_t in_width = 0;   // downstream encoder width (0: same as nat.d_model)
  std::size_t out_width = 0;  // downstream fusion width (0: same as nat.d_model)

  std::size_t input_width() const { return in_width ? in_width : nat.d_model; }
  std::size_t output_width() const { return out_width ? out_width : nat.d_model; }

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw std::invalid_argument("ItcConfig: gamma must be in (0,1]");
    nat.validate();
  }
};

// K = max(1, ceil(gamma |x|)) highest-fertility positions, emitted in
// original source order; ties break toward the smaller index.
inline std::vector<std::size_t> select_top_k(const std::vector<double>& fertility,
                                             double gamma) {
  if (fertility.empty()) throw std::invalid_argument("select_top_k: empty fertility");
  const std::size_t k = compression_cap(fertility.size(), gamma);
  std::vector<std::size_t> idx(fertility.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return fertility[a] > fertility[b];
  });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// 0/1 labels for fertility supervision: does this source token survive into
// the target compression?
inline std::vector<double> fertility_labels(const std::vector<int>& x,
                                            const std::vector<int>& yc) {
  std::vector<double> labels(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (int t : yc)
      if (x[i] == t) {
        labels[i] = 1.0;
        break;
      }
  return labels;
}

struct NatLayer {
  EncLayer self;       // unmasked self-attention block; queries see themselves
  CrossBlock cross;    // attention over the source representation
  LayerNormParams cross_ln;

  static NatLayer init(const ModelConfig& cfg, Rng& rng) {
    NatLayer l;
    l.self = EncLayer::init(cfg, rng);
    l.cross = CrossBlock::init(cfg, rng);
    l.cross_ln = LayerNormParams::init(cfg.d_model);
    return l;
  }

  void collect(NamedParams& out, const std::string& prefix) const {
    self.collect(out, prefix + ".self");
    cross.collect(out, prefix + ".cross");
    cross_ln.collect(out, prefix + ".cross_ln");
  }
};

class ItcModule {
 public:
  ItcModule(const ItcConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t din = cfg_.input_width();
    const std::size_t dnat = cfg_.nat.d_model;
    const std::size_t dout = cfg_.output_width();
    fert_w_ = Tensor::glorot(din, 1, rng);
    fert_b_ = Tensor::zeros({1}, true);
    if (din != dnat) {
      bridge_in_w_ = identity_like(din, dnat);
      bridge_in_b_ = Tensor::zeros({dnat}, true);
    }
    for (std::size_t i = 0; i < cfg_.nat.layers; ++i)
      layers_.push_back(NatLayer::init(cfg_.nat, rng));
    if (dnat != dout) {
      bridge_out_w_ = identity_like(dnat, dout);
      bridge_out_b_ = Tensor::zeros({dout}, true);
    }
    pred_w_ = Tensor::glorot(dout, cfg_.nat.vocab_size, rng);
    pred_b_ = Tensor::zeros({cfg_.nat.vocab_size}, true);
  }

  const ItcConfig& config() const { return cfg_; }

  // sigma(MLP(H_x)) per source row; one affine layer into a sigmoid.
  Tensor fertility_logits(const Tensor& hx) const {
    if (hx.rows() == 0) throw std::invalid_argument("predict_fertility: empty H_x");
    if (hx.cols() != cfg_.input_width())
      throw std::invalid_argument("predict_fertility: width mismatch");
    return add_row(matmul(hx, fert_w_), fert_b_);
  }

  Tensor predict_fertility(const Tensor& hx) const { return sigmoid(fertility_logits(hx)); }

  // One non-autoregressive pass over the selected input copies:
  //   H_itc  = FFN(MultiHead(Q, K, V)) + V     (no causal mask)
  //   H_x^c  = FFN(MultiHead(H_itc, H_x, H_x)) + H_itc
  // then the bridge map when widths differ.
  Tensor nat_decode(const EncoderState& enc, const std::vector<std::size_t>& idx) const {
    if (idx.empty()) throw std::invalid_argument("nat_decode: empty selection");
    ++nat_passes_;
    ForwardCtx ctx{&cfg_.nat, &drop_rng_, training_};
    std::vector<int> ids(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= enc.v.rows()) throw std::out_of_range("nat_decode: index out of range");
      ids[i] = static_cast<int>(idx[i]);
    }
    Tensor x = gather_rows(enc.v, ids);  // copies of the encoder input
    Tensor mem = enc.h;
    if (bridge_in_w_.defined()) {
      x = add_row(matmul(x, bridge_in_w_), bridge_in_b_);
      mem = add_row(matmul(mem, bridge_in_w_), bridge_in_b_);
    }
    for (const auto& l : layers_) {
      Tensor h_itc = l.self.forward(ctx, x, nullptr);
      AttnOut ca = l.cross.forward(ctx, h_itc, mem, enc.valid);
      x = cfg_.nat.pre_norm ? add(h_itc, ca.out)
                            : norm(cfg_.nat, l.cross_ln, add(ca.out, h_itc));
    }
    if (bridge_out_w_.defined()) x = add_row(matmul(x, bridge_out_w_), bridge_out_b_);
    return x;
  }

  // Explicit-token predictor over compressed features (optional head).
  Tensor compression_logits(const Tensor& hc) const {
    return add_row(matmul(hc, pred_w_), pred_b_);
  }

  // Single-term approximation of the compression likelihood: the fertility
  // consistency of the deterministic top-K selection plus the conditional
  // token log-likelihood. Target length must equal K.
  Tensor compression_logprob(const EncoderState& enc, const std::vector<int>& yc) const {
    const std::size_t n = enc.valid;
    const std::size_t k = compression_cap(n, cfg_.gamma);
    if (yc.size() != k)
      throw std::invalid_argument("compression_logprob: target length " +
                                  std::to_string(yc.size()) + " != K " + std::to_string(k));
    Tensor fl = fertility_logits(slice_rows(enc.h, 0, n));
    std::vector<double> pf = sigmoid(fl).values();
    std::vector<std::size_t> idx = select_top_k(pf, cfg_.gamma);
    std::vector<double> labels(n, 0.0);
    for (std::size_t i : idx) labels[i] = 1.0;
    Tensor consistency = scale(bce_with_logits(fl, labels), -static_cast<double>(n));
    Tensor cond = scale(cross_entropy_rows(compression_logits(nat_decode(enc, idx)), yc),
                        -static_cast<double>(k));
    return add(consistency, cond);
  }

  // Stage-1 objective on one pair: fertility BCE against membership labels
  // plus conditional NLL of the target under teacher-forced length.
  Tensor pretrain_pair_loss(const EncoderState& enc, const std::vector<int>& x,
                            const std::vector<int>& yc) const {
    if (yc.empty() || yc.size() > x.size())
      throw std::invalid_argument("itc pretrain: target must be nonempty and no longer than source");
    Tensor fl = fertility_logits(slice_rows(enc.h, 0, x.size()));
    Tensor bce = bce_with_logits(fl, fertility_labels(x, yc));
    std::vector<double> pf = sigmoid(fl).values();
    // teacher-forced selection: K equals the target length
    std::vector<std::size_t> idx = select_k_of(pf, yc.size());
    Tensor nll = cross_entropy_rows(compression_logits(nat_decode(enc, idx)), yc);
    return add(bce, nll);
  }

  NamedParams named_params(const std::string& prefix = "itc") const {
    NamedParams out;
    out.emplace_back(prefix + ".fert.w", fert_w_);
    out.emplace_back(prefix + ".fert.b", fert_b_);
    if (bridge_in_w_.defined()) {
      out.emplace_back(prefix + ".bridge_in.w", bridge_in_w_);
      out.emplace_back(prefix + ".bridge_in.b", bridge_in_b_);
    }
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i].collect(out, prefix + ".nat." + std::to_string(i));
    if (bridge_out_w_.defined()) {
      out.emplace_back(prefix + ".bridge_out.w", bridge_out_w_);
      out.emplace_back(prefix + ".bridge_out.b", bridge_out_b_);
    }
    out.emplace_back(prefix + ".pred.w", pred_w_);
    out.emplace_back(prefix + ".pred.b", pred_b_);
    return out;
  }

  void set_training(bool on) { training_ = on; }
  std::size_t nat_passes() const { return nat_passes_; }
  void reset_counters() const { nat_passes_ = 0; }

  const Tensor& bridge_in_w() const { return bridge_in_w_; }
  const Tensor& bridge_out_w() const { return bridge_out_w_; }

  // exact top-k selection with explicit k (teacher forcing)
  static std::vector<std::size_t> select_k_of(const std::vector<double>& fertility,
                                              std::size_t k) {
    if (fertility.empty() || k == 0 || k > fertility.size())
      throw std::invalid_argument("select_k_of: bad k");
    std::vector<std::size_t> idx(fertility.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return fertility[a] > fertility[b];
    });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
  }

 private:
  static Tensor identity_like(std::size_t rows, std::size_t cols) {
    std::vector<double> w(rows * cols, 0.0);
    for (std::size_t i = 0; i < std::min(rows, cols); ++i) w[i * cols + i] = 1.0;
    return Tensor::from_data({rows, cols}, std::move(w), true);
  }

  ItcConfig cfg_;
  Tensor fert_w_, fert_b_;
  Tensor bridge_in_w_, bridge_in_b_;
  std::vector<NatLayer> layers_;
  Tensor bridge_out_w_, bridge_out_b_;
  Tensor pred_w_, pred_b_;
  bool training_ = false;
  mutable Rng drop_rng_{0xa11ce};
  mutable std::size_t nat_passes_ = 0;
};

// Stage-1 pretraining objective over a batch of (source, compression) pairs.
inline Tensor itc_pretrain_step(const Seq2Seq& model, const ItcModule& itc,
                                const std::vector<std::vector<int>>& xs,
                                const std::vector<std::vector<int>>& ycs) {
  if (xs.empty() || xs.size() != ycs.size())
    throw std::invalid_argument("itc_pretrain_step: empty or mismatched batch");
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EncoderState enc = model.encode(xs[i]);
    total = add(total, itc.pretrain_pair_loss(enc, xs[i], ycs[i]));
  }
  return scale(total, 1.0 / static_cast<double>(xs.size()));
}

}  // namespace tcat
