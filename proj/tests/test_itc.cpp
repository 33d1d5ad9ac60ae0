#include <cmath>

#include "doctest.h"
#include "tcat/itc.hpp"
#include "tcat/optim.hpp"

using namespace tcat;

namespace {

ModelConfig itc_model_cfg(std::size_t vocab = 40) {
  ModelConfig c;
  c.layers = 1;
  c.d_model = 32;
  c.d_ff = 64;
  c.heads = 2;
  c.vocab_size = vocab;
  c.max_len = 48;
  return c;
}

ItcConfig itc_cfg(std::size_t vocab = 40, std::size_t nat_width = 32) {
  ItcConfig c;
  c.gamma = 0.4;
  c.nat = itc_model_cfg(vocab);
  c.nat.d_model = nat_width;
  c.nat.d_ff = 2 * nat_width;
  c.in_width = 32;
  c.out_width = 32;
  return c;
}

// keyword/filler synthetic pairs: ids [6,16) are keepers, [16,36) fillers
struct ToyPair {
  std::vector<int> x, yc;
};

std::vector<ToyPair> toy_pairs(std::size_t n, Rng& rng) {
  std::vector<ToyPair> out;
  while (out.size() < n) {
    ToyPair p;
    std::size_t len = 6 + rng.below(5);
    for (std::size_t i = 0; i < len; ++i) {
      if (rng.bernoulli(0.4)) {
        int t = 6 + static_cast<int>(rng.below(10));
        p.x.push_back(t);
        p.yc.push_back(t);
      } else {
        p.x.push_back(16 + static_cast<int>(rng.below(20)));
      }
    }
    if (!p.yc.empty()) out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("itc");

TEST_CASE("fertility: zeroed map gives 0.5 everywhere, rowwise independence") {
  Rng rng(1);
  ItcModule itc(itc_cfg(), rng);
  ItcModule zeroed(itc_cfg(), rng);
  // zero the fertility map through its named params
  NamedParams np = zeroed.named_params();
  for (auto& [name, t] : np)
    if (name == "itc.fert.w" || name == "itc.fert.b")
      std::fill(t.mutable_values().begin(), t.mutable_values().end(), 0.0);
  Tensor hx = Tensor::randn({5, 32}, rng, 1.0, false);
  Tensor pf = zeroed.predict_fertility(hx);
  CHECK(pf.rows() == 5);
  for (double v : pf.values()) CHECK(v == 0.5);

  // independence: changing row 3 leaves scores 0..2 untouched
  Tensor pf_a = itc.predict_fertility(hx);
  std::vector<double> vals = hx.values();
  for (std::size_t j = 0; j < 32; ++j) vals[3 * 32 + j] += 1.0;
  Tensor pf_b = itc.predict_fertility(Tensor::from_data(hx.shape(), vals));
  for (std::size_t i = 0; i < 3; ++i) CHECK(pf_a.at(i, 0) == pf_b.at(i, 0));
  CHECK(pf_a.at(3, 0) != pf_b.at(3, 0));

  Tensor pf_rand = itc.predict_fertility(hx);
  for (double v : pf_rand.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("select_top_k: K law, gamma 1, ties prefer earlier positions") {
  std::vector<double> f10{0.9, 0.1, 0.8, 0.2, 0.7, 0.3, 0.6, 0.4, 0.5, 0.05};
  std::vector<std::size_t> k4 = select_top_k(f10, 0.4);
  CHECK(k4 == std::vector<std::size_t>{0, 2, 4, 6});

  std::vector<std::size_t> all = select_top_k(f10, 1.0);
  CHECK(all.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(all[i] == i);

  std::vector<double> equal(6, 0.5);
  std::vector<std::size_t> first = select_top_k(equal, 0.5);
  CHECK(first == std::vector<std::size_t>{0, 1, 2});

  // strictly increasing output everywhere
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> f(1 + rng.below(16));
    for (auto& v : f) v = rng.uniform();
    std::vector<std::size_t> idx = select_top_k(f, 0.05 + 0.95 * rng.uniform());
    for (std::size_t i = 1; i < idx.size(); ++i) CHECK(idx[i] > idx[i - 1]);
  }
}

TEST_CASE("K law exact over |x| in 1..64 and the gamma grid") {
  for (std::size_t n = 1; n <= 64; ++n) {
    for (int g = 1; g <= 20; ++g) {
      double gamma = 0.05 * g;
      std::size_t k = compression_cap(n, gamma);
      std::size_t expect = static_cast<std::size_t>(
          std::max<double>(1.0, std::ceil(gamma * static_cast<double>(n))));
      CHECK(k == expect);
      std::vector<double> f(n, 0.5);
      CHECK(select_top_k(f, gamma).size() == k);
    }
  }
}

TEST_CASE("nat_decode: shape, single pass, self-visibility, encoder gradient") {
  Rng rng(3);
  ModelConfig mc = itc_model_cfg();
  Seq2Seq model(mc, FusionMode::none, rng);
  ItcModule itc(itc_cfg(), rng);

  EncoderState enc = model.encode({6, 7, 8, 9, 10, 11});
  std::vector<std::size_t> idx{0, 2, 5};
  itc.reset_counters();
  Tensor hc = itc.nat_decode(enc, idx);
  CHECK(hc.rows() == 3);
  CHECK(hc.cols() == 32);
  CHECK(itc.nat_passes() == 1);

  // zeroing a selected position's own input row changes its output row
  EncoderState enc2 = enc;
  std::vector<double> v = enc.v.values();
  for (std::size_t j = 0; j < 32; ++j) v[2 * 32 + j] = 0.0;
  enc2.v = Tensor::from_data(enc.v.shape(), v);
  Tensor hc2 = itc.nat_decode(enc2, idx);
  bool row1_changed = false;
  for (std::size_t j = 0; j < 32 && !row1_changed; ++j)
    if (hc.at(1, j) != hc2.at(1, j)) row1_changed = true;
  CHECK(row1_changed);

  // downstream gradient reaches encoder parameters through H_x^c
  NamedParams mp = model.named_params();
  std::vector<Tensor> params = values_of(mp);
  zero_grads(params);
  backward(sum_all(itc.nat_decode(enc, idx)));
  auto gnorm = [&](const std::string& name) {
    for (const auto& [n, t] : mp)
      if (n == name) {
        double s = 0;
        for (double g : t.grad()) s += std::abs(g);
        return s;
      }
    return -1.0;
  };
  CHECK(gnorm("model.enc.0.attn.wq") > 0.0);
  CHECK(gnorm("model.emb") > 0.0);
}

TEST_CASE("bridge maps appear only when widths differ, identity-like init") {
  Rng rng(4);
  ItcModule same(itc_cfg(), rng);
  CHECK_FALSE(same.bridge_in_w().defined());
  CHECK_FALSE(same.bridge_out_w().defined());

  ItcConfig wide = itc_cfg(40, 16);  // NAT narrower than the downstream width
  ItcModule bridged(wide, rng);
  CHECK(bridged.bridge_in_w().defined());
  CHECK(bridged.bridge_out_w().defined());
  const Tensor& bo = bridged.bridge_out_w();
  CHECK(bo.rows() == 16);
  CHECK(bo.cols() == 32);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 32; ++j) CHECK(bo.at(i, j) == (i == j ? 1.0 : 0.0));

  ModelConfig mc = itc_model_cfg();
  Seq2Seq model(mc, FusionMode::none, rng);
  EncoderState enc = model.encode({6, 7, 8, 9, 10});
  Tensor hc = bridged.nat_decode(enc, {0, 1});
  CHECK(hc.cols() == 32);
}

TEST_CASE("compression_logprob: saturated predictor scores ~0, uniform scores K log 1/V") {
  Rng rng(5);
  ModelConfig mc = itc_model_cfg();
  Seq2Seq model(mc, FusionMode::none, rng);
  ItcConfig cfg = itc_cfg();
  cfg.gamma = 1.0;  // K = |x|, membership labels all 1
  ItcModule itc(cfg, rng);

  NamedParams np = itc.named_params();
  auto set_all = [&](const std::string& name, double v) {
    for (auto& [n, t] : np)
      if (n == name) std::fill(t.mutable_values().begin(), t.mutable_values().end(), v);
  };
  set_all("itc.fert.w", 0.0);
  set_all("itc.fert.b", 40.0);  // p_f saturates to exactly 1
  set_all("itc.pred.w", 0.0);
  set_all("itc.pred.b", 0.0);

  std::vector<int> x{6, 7, 8};
  EncoderState enc = model.encode(x);
  double ll = itc.compression_logprob(enc, x).item();
  double expect = 3.0 * std::log(1.0 / static_cast<double>(mc.vocab_size));
  CHECK(ll == doctest::Approx(expect).epsilon(1e-9));

  // one-hot predictor on a constant target: log-likelihood ~ 0
  for (auto& [n, t] : np)
    if (n == "itc.pred.b") t.mutable_values()[7] = 800.0;
  double ll2 = itc.compression_logprob(enc, {7, 7, 7}).item();
  CHECK(std::abs(ll2) < 1e-12);

  CHECK_THROWS_AS((void)itc.compression_logprob(enc, {6}), std::invalid_argument);
}

TEST_CASE("itc pretraining: errors, finiteness, loss decreases, fertility separates") {
  Rng rng(6);
  ModelConfig mc = itc_model_cfg();
  Seq2Seq model(mc, FusionMode::none, rng);
  ItcModule itc(itc_cfg(), rng);
  Seq2Seq* mp = &model;
  CHECK_THROWS_AS((void)itc_pretrain_step(*mp, itc, {}, {}), std::invalid_argument);

  Rng drng(7);
  std::vector<ToyPair> pairs = toy_pairs(50, drng);
  std::vector<std::vector<int>> xs, ycs;
  for (const auto& p : pairs) {
    xs.push_back(p.x);
    ycs.push_back(p.yc);
  }
  double first_loss = itc_pretrain_step(model, itc, xs, ycs).item();
  CHECK(first_loss > 0.0);
  CHECK(std::isfinite(first_loss));

  NamedParams named = model.named_params("model");
  NamedParams inp = itc.named_params("itc");
  named.insert(named.end(), inp.begin(), inp.end());
  std::vector<Tensor> params = values_of(named);
  AdamState st;
  AdamConfig ocfg;
  ocfg.lr = 2e-3;
  model.set_training(true);
  itc.set_training(true);
  double last_loss = 0.0;
  Rng brng(8);
  for (int step = 0; step < 200; ++step) {
    std::vector<std::vector<int>> bx, by;
    for (int i = 0; i < 8; ++i) {
      std::size_t pick = brng.below(xs.size());
      bx.push_back(xs[pick]);
      by.push_back(ycs[pick]);
    }
    zero_grads(params);
    Tensor loss = itc_pretrain_step(model, itc, bx, by);
    backward(loss);
    adam_step(params, st, ocfg);
    last_loss = loss.item();
  }
  model.set_training(false);
  itc.set_training(false);
  CHECK(last_loss < first_loss);

  // kept tokens now score higher fertility than dropped ones on average
  double kept_sum = 0, kept_n = 0, drop_sum = 0, drop_n = 0;
  for (std::size_t s = 0; s < 20; ++s) {
    NoGradGuard ng;
    EncoderState enc = model.encode(xs[s]);
    Tensor pf = itc.predict_fertility(enc.h);
    std::vector<double> labels = fertility_labels(xs[s], ycs[s]);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] > 0.5) {
        kept_sum += pf.at(i, 0);
        kept_n += 1;
      } else {
        drop_sum += pf.at(i, 0);
        drop_n += 1;
      }
    }
  }
  CHECK(kept_sum / kept_n > drop_sum / drop_n);
}

TEST_SUITE_END();
