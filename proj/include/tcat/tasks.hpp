#pragma once

// Downstream task heads: encoder-decoder translation plus encoder-classifier
// span extraction and multiple choice, with the template builders that turn
// (passage, question[, option]) into model inputs.

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tcat/transformer.hpp"

namespace tcat {

enum class TaskKind { translate, compress, span, choice };

inline const char* task_name(TaskKind k) {
  switch (k) {
    case TaskKind::translate: return "translate";
    case TaskKind::compress: return "compress";
    case TaskKind::span: return "span";
    case TaskKind::choice: return "choice";
  }
  return "?";
}

inline TaskKind parse_task(const std::string& s) {
  if (s == "translate") return TaskKind::translate;
  if (s == "compress") return TaskKind::compress;
  if (s == "span") return TaskKind::span;
  if (s == "choice") return TaskKind::choice;
  throw std::invalid_argument("unknown task: " + s);
}

inline bool task_is_encoder_decoder(TaskKind k) {
  return k == TaskKind::translate || k == TaskKind::compress;
}

struct TaskSample {
  TaskKind kind = TaskKind::translate;
  std::vector<int> src, tgt;              // translate / compress
  std::vector<int> passage, question;     // span / choice
  std::vector<std::vector<int>> options;  // choice
  int ans_start = -1, ans_end = -1;       // span answer, passage-token indices; -1,-1 = no answer
  int ans_choice = -1;
};

// ---------------------------------------------------------------------------
// input templates

// [CLS] P [SEP] Q [SEP]; the passage is right-truncated to fit max_len, the
// question never is.
inline std::vector<int> build_span_input(const std::vector<int>& passage,
                                         const std::vector<int>& question,
                                         std::size_t max_len) {
  if (passage.empty() || question.empty())
    throw std::invalid_argument("build_span_input: passage and question must be nonempty");
  if (question.size() + 4 > max_len)
    throw std::length_error("build_span_input: question alone exceeds max_len");
  const std::size_t room = max_len - 3 - question.size();
  const std::size_t keep = std::min(room, passage.size());
  std::vector<int> out{special::kCls};
  out.insert(out.end(), passage.begin(), passage.begin() + keep);
  out.push_back(special::kSep);
  out.insert(out.end(), question.begin(), question.end());
  out.push_back(special::kSep);
  return out;
}

// [CLS] P||Q [SEP] O [SEP]; P truncates first, then Q, never the option.
inline std::vector<int> build_choice_input(const std::vector<int>& passage,
                                           const std::vector<int>& question,
                                           const std::vector<int>& option,
                                           std::size_t max_len) {
  if (option.empty()) throw std::invalid_argument("build_choice_input: empty option");
  if (passage.empty() || question.empty())
    throw std::invalid_argument("build_choice_input: passage and question must be nonempty");
  if (option.size() + 4 > max_len)
    throw std::length_error("build_choice_input: option alone exceeds max_len");
  std::size_t room = max_len - 3 - option.size();
  if (room == 0) throw std::length_error("build_choice_input: no room for context");
  // passage truncates before the question does
  std::size_t keep_q = std::min(question.size(), room);
  std::size_t keep_p = std::min(passage.size(), room - keep_q);
  std::vector<int> out{special::kCls};
  out.insert(out.end(), passage.begin(), passage.begin() + keep_p);
  out.insert(out.end(), question.begin(), question.begin() + keep_q);
  out.push_back(special::kSep);
  out.insert(out.end(), option.begin(), option.end());
  out.push_back(special::kSep);
  return out;
}

// Recovers (P, Q) from an untruncated span input; throws on malformed input.
inline std::pair<std::vector<int>, std::vector<int>> parse_span_input(
    const std::vector<int>& ids) {
  if (ids.size() < 5 || ids.front() != special::kCls || ids.back() != special::kSep)
    throw std::invalid_argument("parse_span_input: malformed template");
  std::vector<std::size_t> seps;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == special::kSep) seps.push_back(i);
  if (seps.size() != 2) throw std::invalid_argument("parse_span_input: need exactly two SEP");
  std::vector<int> p(ids.begin() + 1, ids.begin() + static_cast<long>(seps[0]));
  std::vector<int> q(ids.begin() + static_cast<long>(seps[0]) + 1,
                     ids.begin() + static_cast<long>(seps[1]));
  return {p, q};
}

// Recovers (P||Q, O) from an untruncated choice input.
inline std::pair<std::vector<int>, std::vector<int>> parse_choice_input(
    const std::vector<int>& ids) {
  return parse_span_input(ids);  // same [CLS] seg [SEP] seg [SEP] frame
}

// ---------------------------------------------------------------------------
// span argmax search

// Joint argmax over start/end pairs with s <= e within a bounded window;
// the (0,0) cell encodes "unanswerable" and competes with the best span.
inline std::pair<int, int> span_argmax(const std::vector<double>& start_p,
                                       const std::vector<double>& end_p,
                                       std::size_t max_span = 30) {
  if (start_p.size() != end_p.size() || start_p.empty())
    throw std::invalid_argument("span_argmax: distribution size mismatch");
  double null_score = start_p[0] * end_p[0];
  double best = -1.0;
  std::pair<int, int> best_span{0, 0};
  for (std::size_t s = 1; s < start_p.size(); ++s) {
    for (std::size_t e = s; e < std::min(start_p.size(), s + max_span + 1); ++e) {
      double v = start_p[s] * end_p[e];
      if (v > best) {
        best = v;
        best_span = {static_cast<int>(s), static_cast<int>(e)};
      }
    }
  }
  if (best <= null_score) return {0, 0};
  return best_span;
}

// ---------------------------------------------------------------------------
// encoder-classifier model

class EncoderClassifier {
 public:
  EncoderClassifier(const ModelConfig& cfg, FusionMode fusion, Rng& rng)
      : cfg_(cfg), fusion_(fusion), drop_rng_(rng.split(0xc1a5)) {
    cfg_.validate();
    if (fusion_ != FusionMode::none && fusion_ != FusionMode::bef)
      throw std::invalid_argument("EncoderClassifier: only BEF applies to classifier tasks");
    embedding_ = Tensor::randn({cfg_.vocab_size, cfg_.d_model}, rng, 1.0);
    pos_ = sinusoidal_table(cfg_.max_len, cfg_.d_model);
    for (std::size_t i = 0; i < cfg_.layers; ++i) enc_.push_back(EncLayer::init(cfg_, rng));
    if (fusion_ == FusionMode::bef) bef_ = FusionBlock::init(cfg_, rng);
    final_ln_ = LayerNormParams::init(cfg_.d_model);
    start_w_ = Tensor::glorot(cfg_.d_model, 1, rng);
    start_b_ = Tensor::zeros({1}, true);
    end_w_ = Tensor::glorot(cfg_.d_model, 1, rng);
    end_b_ = Tensor::zeros({1}, true);
    verif_w_ = Tensor::glorot(cfg_.d_model, 1, rng);
    verif_b_ = Tensor::zeros({1}, true);
    choice_w1_ = Tensor::glorot(cfg_.d_model, cfg_.d_model, rng);
    choice_b1_ = Tensor::zeros({cfg_.d_model}, true);
    choice_w2_ = Tensor::glorot(cfg_.d_model, 1, rng);
    choice_b2_ = Tensor::zeros({1}, true);
  }

  const ModelConfig& config() const { return cfg_; }
  FusionMode fusion() const { return fusion_; }
  void set_training(bool on) { training_ = on; }

  EncoderState encode(const std::vector<int>& ids, std::size_t valid = kAll) const {
    if (ids.empty()) throw std::invalid_argument("encode: empty input");
    if (valid == kAll) valid = ids.size();
    ForwardCtx ctx{&cfg_, &drop_rng_, training_};
    Tensor x = positional_encode(gather_rows(embedding_, ids), pos_);
    EncoderState st;
    st.v = x;
    AttnMask pad = AttnMask::key_prefix(ids.size(), valid);
    const AttnMask* mask = valid < ids.size() ? &pad : nullptr;
    for (const auto& l : enc_) x = l.forward(ctx, x, mask);
    if (cfg_.pre_norm) x = norm(cfg_, final_ln_, x);
    st.h = std::move(x);
    st.ids = ids;
    st.valid = valid;
    return st;
  }

  // H_x' via BEF when this model fuses, otherwise H_x unchanged.
  Tensor task_hidden(const EncoderState& enc, const CompressedRep* comp = nullptr) const {
    if (fusion_ == FusionMode::none) return enc.h;
    if (!comp || !comp->h.defined() || comp->valid == 0)
      throw std::invalid_argument("task_hidden: BEF needs a compressed representation");
    ForwardCtx ctx{&cfg_, &drop_rng_, training_};
    return fuse_bef(ctx, *bef_, enc.h, comp->h, comp->valid);
  }

  // start/end pointer logits over positions, each 1 x L
  std::pair<Tensor, Tensor> span_logits(const Tensor& h) const {
    Tensor s = reshape(add_row(matmul(h, start_w_), start_b_), {1, h.rows()});
    Tensor e = reshape(add_row(matmul(h, end_w_), end_b_), {1, h.rows()});
    return {s, e};
  }

  // two pointer distributions over positions
  std::pair<Tensor, Tensor> span_predict(const Tensor& h) const {
    auto [s, e] = span_logits(h);
    return {softmax_rows(s), softmax_rows(e)};
  }

  Tensor answerability_logit(const Tensor& h) const {
    return add_row(matmul(slice_rows(h, 0, 1), verif_w_), verif_b_);
  }

  // sigmoid binary head on the [CLS] position
  Tensor answerability_verify(const Tensor& h) const { return sigmoid(answerability_logit(h)); }

  // scalar MLP score of one option's [CLS] state
  Tensor choice_score(const Tensor& h) const {
    Tensor cls = slice_rows(h, 0, 1);
    Tensor hid = gelu(add_row(matmul(cls, choice_w1_), choice_b1_));
    return add_row(matmul(hid, choice_w2_), choice_b2_);
  }

  Tensor choice_logits(const std::vector<Tensor>& option_hidden) const {
    if (option_hidden.size() < 2)
      throw std::invalid_argument("choice_predict: need at least two options");
    std::vector<Tensor> scores;
    scores.reserve(option_hidden.size());
    for (const Tensor& h : option_hidden) scores.push_back(choice_score(h));
    return concat_cols(scores);
  }

  // distribution over options
  Tensor choice_predict(const std::vector<Tensor>& option_hidden) const {
    return softmax_rows(choice_logits(option_hidden));
  }

  NamedParams named_params(const std::string& prefix = "clf") const {
    NamedParams out;
    out.emplace_back(prefix + ".emb", embedding_);
    for (std::size_t i = 0; i < enc_.size(); ++i)
      enc_[i].collect(out, prefix + ".enc." + std::to_string(i));
    if (bef_) bef_->collect(out, prefix + ".bef");
    final_ln_.collect(out, prefix + ".final_ln");
    out.emplace_back(prefix + ".span.start_w", start_w_);
    out.emplace_back(prefix + ".span.start_b", start_b_);
    out.emplace_back(prefix + ".span.end_w", end_w_);
    out.emplace_back(prefix + ".span.end_b", end_b_);
    out.emplace_back(prefix + ".verif.w", verif_w_);
    out.emplace_back(prefix + ".verif.b", verif_b_);
    out.emplace_back(prefix + ".choice.w1", choice_w1_);
    out.emplace_back(prefix + ".choice.b1", choice_b1_);
    out.emplace_back(prefix + ".choice.w2", choice_w2_);
    out.emplace_back(prefix + ".choice.b2", choice_b2_);
    return out;
  }

  void make_fusion_identity() {
    if (bef_) neutralize_fusion_block(*bef_);
  }

 private:
  ModelConfig cfg_;
  FusionMode fusion_;
  Tensor embedding_, pos_;
  std::vector<EncLayer> enc_;
  std::optional<FusionBlock> bef_;
  LayerNormParams final_ln_;
  Tensor start_w_, start_b_, end_w_, end_b_;
  Tensor verif_w_, verif_b_;
  Tensor choice_w1_, choice_b1_, choice_w2_, choice_b2_;
  bool training_ = false;
  mutable Rng drop_rng_{0};
};

// ---------------------------------------------------------------------------
// translation decode with optional compression aid

inline std::vector<int> translate_greedy(const Seq2Seq& model, const std::vector<int>& src,
                                         const CompressedRep* comp, std::size_t max_steps) {
  EncoderState enc = model.encode(src);
  Memory mem = model.build_memory(enc, comp);
  return model.greedy_decode(mem, max_steps);
}

}  // namespace tcat
