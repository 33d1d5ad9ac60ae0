#include <cmath>

#include "doctest.h"
#include "fd_check.hpp"
#include "tcat/transformer.hpp"

using namespace tcat;

namespace {

ModelConfig tiny_cfg(std::size_t vocab = 20) {
  ModelConfig c;
  c.layers = 2;
  c.d_model = 32;
  c.d_ff = 64;
  c.heads = 4;
  c.vocab_size = vocab;
  c.max_len = 32;
  return c;
}

}  // namespace

TEST_SUITE_BEGIN("transformer");

TEST_CASE("model config validation") {
  ModelConfig c = tiny_cfg();
  CHECK_NOTHROW(c.validate());
  c.heads = 5;  // 32 % 5 != 0
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_cfg();
  c.vocab_size = 2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("positional encoding: analytic row 0, empty input, injectivity") {
  Tensor table = sinusoidal_table(16, 8);
  // position 0: even channels sin(0)=0, odd channels cos(0)=1
  for (std::size_t i = 0; i < 8; i += 2) {
    CHECK(table.at(0, i) == 0.0);
    CHECK(table.at(0, i + 1) == 1.0);
  }

  Tensor emb = Tensor::zeros({3, 8});
  Tensor enc = positional_encode(emb, table);
  for (std::size_t j = 0; j < 8; ++j) CHECK(enc.at(1, j) == table.at(1, j));

  Tensor empty = positional_encode(Tensor::zeros({0, 8}), table);
  CHECK(empty.rows() == 0);

  CHECK_THROWS_AS((void)positional_encode(Tensor::zeros({17, 8}), table), std::length_error);

  // all positions receive distinct additive vectors
  for (std::size_t a = 0; a < 16; ++a)
    for (std::size_t b = a + 1; b < 16; ++b) {
      bool differ = false;
      for (std::size_t j = 0; j < 8 && !differ; ++j)
        if (table.at(a, j) != table.at(b, j)) differ = true;
      CHECK(differ);
    }
}

TEST_CASE("self_attention: single key, uniform scores, causal position 0") {
  Rng rng(1);
  Tensor q = Tensor::randn({3, 4}, rng, 1.0, false);
  Tensor k1 = Tensor::randn({1, 4}, rng, 1.0, false);
  Tensor v1 = Tensor::randn({1, 4}, rng, 1.0, false);
  AttnOut a = self_attention(q, k1, v1);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(a.out.at(i, j) == v1.at(0, j));

  // orthogonal query: all scores equal, output is the mean of V rows
  Tensor q0 = Tensor::zeros({1, 4});
  Tensor k = Tensor::randn({5, 4}, rng, 1.0, false);
  Tensor v = Tensor::randn({5, 3}, rng, 1.0, false);
  AttnOut u = self_attention(q0, k, v);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 5; ++i) mean += v.at(i, j) / 5.0;
    CHECK(u.out.at(0, j) == doctest::Approx(mean).epsilon(1e-12));
  }

  AttnMask causal = AttnMask::causal(3);
  Tensor kv = Tensor::randn({3, 4}, rng, 1.0, false);
  AttnOut c = self_attention(kv, kv, kv, &causal);
  CHECK(c.attn[0] == doctest::Approx(1.0));
  CHECK(c.attn[1] == 0.0);
  CHECK(c.attn[2] == 0.0);
}

TEST_CASE("multi_head with one identity head equals self_attention") {
  ModelConfig cfg = tiny_cfg();
  cfg.heads = 1;
  cfg.d_model = 6;
  Rng rng(2);
  Tensor x = Tensor::randn({4, 6}, rng, 1.0, false);
  MhaParams p;
  std::vector<double> eye(36, 0.0);
  for (int i = 0; i < 6; ++i) eye[i * 6 + i] = 1.0;
  p.wq = Tensor::from_data({6, 6}, eye);
  p.wk = Tensor::from_data({6, 6}, eye);
  p.wv = Tensor::from_data({6, 6}, eye);
  p.wo = Tensor::from_data({6, 6}, eye);
  AttnOut mh = multi_head(cfg, p, x, x, x);
  AttnOut sa = self_attention(x, x, x);
  CHECK(mh.out.values() == sa.out.values());
}

TEST_CASE("multi_head output shape law and head permutation invariance") {
  ModelConfig cfg = tiny_cfg();
  cfg.d_model = 8;
  cfg.heads = 2;
  Rng rng(3);
  MhaParams p = MhaParams::init(8, rng);
  Tensor q = Tensor::randn({5, 8}, rng, 1.0, false);
  Tensor kv = Tensor::randn({7, 8}, rng, 1.0, false);
  AttnOut a = multi_head(cfg, p, q, kv, kv);
  CHECK(a.out.rows() == 5);
  CHECK(a.out.cols() == 8);

  // swap the two heads' projection column blocks and W^O row blocks
  auto swap_cols = [](const Tensor& t) {
    std::vector<double> v(t.numel());
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) v[i * 8 + (j + 4) % 8] = t.at(i, j);
    return Tensor::from_data({8, 8}, v);
  };
  auto swap_rows = [](const Tensor& t) {
    std::vector<double> v(t.numel());
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) v[((i + 4) % 8) * 8 + j] = t.at(i, j);
    return Tensor::from_data({8, 8}, v);
  };
  MhaParams perm;
  perm.wq = swap_cols(p.wq);
  perm.wk = swap_cols(p.wk);
  perm.wv = swap_cols(p.wv);
  perm.wo = swap_rows(p.wo);
  AttnOut b = multi_head(cfg, perm, q, kv, kv);
  for (std::size_t i = 0; i < a.out.numel(); ++i)
    CHECK(a.out.values()[i] == doctest::Approx(b.out.values()[i]).epsilon(1e-12));
}

TEST_CASE("encode: shape, padding neutrality, position sensitivity, empty error") {
  ModelConfig cfg = tiny_cfg();
  Rng rng(4);
  Seq2Seq model(cfg, FusionMode::none, rng);

  std::vector<int> ids{6, 7, 8, 9, 10};
  EncoderState st = model.encode(ids);
  CHECK(st.h.rows() == 5);
  CHECK(st.h.cols() == cfg.d_model);

  std::vector<int> padded = ids;
  padded.push_back(special::kPad);
  padded.push_back(special::kPad);
  EncoderState stp = model.encode(padded, ids.size());
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < cfg.d_model; ++j) CHECK(stp.h.at(i, j) == st.h.at(i, j));

  std::vector<int> swapped{7, 6, 8, 9, 10};
  EncoderState sts = model.encode(swapped);
  bool differs = false;
  for (std::size_t j = 0; j < cfg.d_model && !differs; ++j)
    if (sts.h.at(2, j) != st.h.at(2, j)) differs = true;
  CHECK(differs);

  CHECK_THROWS_AS((void)model.encode({}), std::invalid_argument);
  CHECK_THROWS_AS((void)model.encode({999}), std::out_of_range);
}

TEST_CASE("decode_step: distribution and attention rows sum to one") {
  ModelConfig cfg = tiny_cfg();
  Rng rng(5);
  Seq2Seq model(cfg, FusionMode::none, rng);
  Memory mem = model.build_memory(model.encode({6, 7, 8, 9}));
  StepOut s = model.decode_step({special::kBos, 10, 11}, mem);
  double ps = 0.0;
  for (double v : s.dist.values()) ps += v;
  CHECK(std::abs(ps - 1.0) < 1e-9);
  double as = 0.0;
  for (double v : s.attn_row) as += v;
  CHECK(std::abs(as - 1.0) < 1e-9);
  CHECK(s.attn_row.size() == 4);
  CHECK(s.o.cols() == cfg.d_model);

  CHECK_THROWS_AS((void)model.decode_step({10, 11}, mem), std::invalid_argument);
  std::vector<int> toolong(cfg.max_len + 1, 6);
  toolong[0] = special::kBos;
  CHECK_THROWS_AS((void)model.decode_step(toolong, mem), std::length_error);
}

TEST_CASE("causality: positions after i never influence output i") {
  ModelConfig cfg = tiny_cfg();
  Rng rng(6);
  Seq2Seq model(cfg, FusionMode::none, rng);
  Memory mem = model.build_memory(model.encode({6, 7, 8}));
  Tensor full = model.decode_logits({special::kBos, 10, 11, 12, 13}, mem);
  Tensor pert = model.decode_logits({special::kBos, 10, 11, 14, 15}, mem);
  for (std::size_t i = 0; i < 3; ++i)  // rows 0..2 see identical prefixes
    for (std::size_t j = 0; j < cfg.vocab_size; ++j)
      CHECK(full.at(i, j) == pert.at(i, j));
  bool later_differ = false;
  for (std::size_t j = 0; j < cfg.vocab_size && !later_differ; ++j)
    if (full.at(3, j) != pert.at(3, j)) later_differ = true;
  CHECK(later_differ);
}

TEST_CASE("decoder pass counter counts one per forward") {
  ModelConfig cfg = tiny_cfg();
  Rng rng(7);
  Seq2Seq model(cfg, FusionMode::none, rng);
  Memory mem = model.build_memory(model.encode({6, 7, 8}));
  model.reset_counters();
  (void)model.decode_step({special::kBos, 9}, mem);
  (void)model.decode_step({special::kBos, 9, 10}, mem);
  CHECK(model.decoder_passes() == 2);
}

TEST_CASE("translation loss gradient matches finite differences on 2-layer width-32") {
  ModelConfig cfg = tiny_cfg();
  Rng rng(8);
  Seq2Seq model(cfg, FusionMode::bbf, rng);
  std::vector<int> src{6, 7, 8, 9, 10, 11};
  std::vector<int> comp_ids{6, 8, 10};
  std::vector<int> tgt{12, 13, 14};

  NamedParams named = model.named_params();
  std::vector<Tensor> params = values_of(named);
  auto fwd = [&] {
    EncoderState enc = model.encode(src);
    EncoderState ce = model.encode(comp_ids);
    CompressedRep rep{ce.h, ce.h.rows()};
    Memory mem = model.build_memory(enc, &rep);
    return model.teacher_loss(tgt, mem);
  };
  double err = tcat_test::fd_max_rel_err(fwd, params, 1e-5, 4);
  CHECK(err < 1e-3);
}

TEST_CASE("pre-norm variant stays finite and differentiable") {
  ModelConfig cfg = tiny_cfg();
  cfg.pre_norm = true;
  Rng rng(9);
  Seq2Seq model(cfg, FusionMode::none, rng);
  NamedParams named = model.named_params();
  std::vector<Tensor> params = values_of(named);
  auto fwd = [&] {
    Memory mem = model.build_memory(model.encode({6, 7, 8, 9}));
    return model.teacher_loss({10, 11}, mem);
  };
  double err = tcat_test::fd_max_rel_err(fwd, params, 1e-5, 3);
  CHECK(err < 1e-3);
}

TEST_CASE("greedy decode emits only content tokens and stops at EOS or cap") {
  ModelConfig cfg = tiny_cfg();
  Rng rng(10);
  Seq2Seq model(cfg, FusionMode::none, rng);
  Memory mem = model.build_memory(model.encode({6, 7, 8, 9}));
  std::vector<int> out = model.greedy_decode(mem, 6);
  CHECK(out.size() <= 6);
  for (int t : out) {
    CHECK(t != special::kPad);
    CHECK(t != special::kBos);
    CHECK(t != special::kCls);
    CHECK(t != special::kSep);
    CHECK(t != special::kEos);
  }
}

TEST_SUITE_END();
