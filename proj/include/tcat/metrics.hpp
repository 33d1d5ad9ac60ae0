#pragma once

// Evaluation metrics: ROUGE-1/2/L F1, corpus BLEU with brevity penalty
// (multi-bleu behavior, no smoothing unless asked), span EM/F1 and label
// accuracy. All operate on token sequences.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcat/data.hpp"

namespace tcat {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricReport {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double score = 0.0;  // F1 for overlap metrics, the score itself otherwise
  std::size_t samples = 0;
};

namespace metric_detail {

inline std::vector<std::string> folded(const std::vector<std::string>& toks, bool fold) {
  if (!fold) return toks;
  std::vector<std::string> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(lowercase(t));
  return out;
}

inline std::map<std::vector<std::string>, std::size_t> ngram_counts(
    const std::vector<std::string>& toks, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  if (toks.size() >= n)
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
      ++counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
  return counts;
}

inline double harmonic_f1(double p, double r) {
  return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace metric_detail

// Clipped n-gram overlap precision/recall/F1.
inline Prf rouge_n(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                   std::size_t n, bool case_fold = true) {
  if (n < 1) throw std::invalid_argument("rouge_n: n must be >= 1");
  auto c = metric_detail::ngram_counts(metric_detail::folded(cand, case_fold), n);
  auto r = metric_detail::ngram_counts(metric_detail::folded(ref, case_fold), n);
  std::size_t cand_total = 0, ref_total = 0, overlap = 0;
  for (const auto& [g, cnt] : c) cand_total += cnt;
  for (const auto& [g, cnt] : r) ref_total += cnt;
  for (const auto& [g, cnt] : c) {
    auto it = r.find(g);
    if (it != r.end()) overlap += std::min(cnt, it->second);
  }
  Prf out;
  out.precision = cand_total ? static_cast<double>(overlap) / cand_total : 0.0;
  out.recall = ref_total ? static_cast<double>(overlap) / ref_total : 0.0;
  out.f1 = metric_detail::harmonic_f1(out.precision, out.recall);
  return out;
}

inline std::size_t lcs_length(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline Prf rouge_l(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                   bool case_fold = true) {
  if (ref.empty()) throw std::invalid_argument("rouge_l: empty reference");
  auto c = metric_detail::folded(cand, case_fold);
  auto r = metric_detail::folded(ref, case_fold);
  const double lcs = static_cast<double>(lcs_length(c, r));
  Prf out;
  out.precision = c.empty() ? 0.0 : lcs / static_cast<double>(c.size());
  out.recall = lcs / static_cast<double>(r.size());
  out.f1 = metric_detail::harmonic_f1(out.precision, out.recall);
  return out;
}

// Corpus-level BLEU in [0,100]: geometric mean of clipped n-gram precisions
// times the brevity penalty e^{1 - r/c} when the candidate corpus is short.
// Without smoothing any zero precision zeroes the score.
inline double bleu(const std::vector<std::vector<std::string>>& cands,
                   const std::vector<std::vector<std::string>>& refs, std::size_t max_n = 4,
                   bool smooth = false) {
  if (cands.size() != refs.size())
    throw std::invalid_argument("bleu: candidate/reference count mismatch");
  if (cands.empty()) throw std::invalid_argument("bleu: empty corpus");
  if (max_n < 1) throw std::invalid_argument("bleu: max_n must be >= 1");
  std::vector<std::size_t> match(max_n, 0), total(max_n, 0);
  std::size_t cand_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < cands.size(); ++s) {
    cand_len += cands[s].size();
    ref_len += refs[s].size();
    for (std::size_t n = 1; n <= max_n; ++n) {
      auto c = metric_detail::ngram_counts(cands[s], n);
      auto r = metric_detail::ngram_counts(refs[s], n);
      for (const auto& [g, cnt] : c) {
        total[n - 1] += cnt;
        auto it = r.find(g);
        if (it != r.end()) match[n - 1] += std::min(cnt, it->second);
      }
    }
  }
  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_n; ++n) {
    double p;
    if (smooth)
      p = (static_cast<double>(match[n]) + 1.0) / (static_cast<double>(total[n]) + 1.0);
    else if (total[n] == 0 || match[n] == 0)
      return 0.0;
    else
      p = static_cast<double>(match[n]) / static_cast<double>(total[n]);
    log_sum += std::log(p);
  }
  double bp = 1.0;
  if (cand_len == 0) return 0.0;
  if (cand_len < ref_len)
    bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(max_n));
}

struct EmF1 {
  double em = 0.0;
  double f1 = 0.0;
};

// Exact sequence match plus bag-of-tokens F1.
inline EmF1 span_em_f1(const std::vector<std::string>& pred,
                       const std::vector<std::string>& gold) {
  if (gold.empty()) throw std::invalid_argument("span_em_f1: empty gold span");
  EmF1 out;
  out.em = pred == gold ? 1.0 : 0.0;
  if (pred.empty()) return out;
  std::map<std::string, std::size_t> pc, gc;
  for (const auto& t : pred) ++pc[t];
  for (const auto& t : gold) ++gc[t];
  std::size_t overlap = 0;
  for (const auto& [t, c] : pc) {
    auto it = gc.find(t);
    if (it != gc.end()) overlap += std::min(c, it->second);
  }
  double p = static_cast<double>(overlap) / static_cast<double>(pred.size());
  double r = static_cast<double>(overlap) / static_cast<double>(gold.size());
  out.f1 = metric_detail::harmonic_f1(p, r);
  return out;
}

inline double accuracy(const std::vector<int>& preds, const std::vector<int>& golds) {
  if (preds.size() != golds.size() || preds.empty())
    throw std::invalid_argument("accuracy: prediction/gold length mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == golds[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

// token-level variants working on id sequences (decoded through a vocab)
inline EmF1 span_em_f1_ids(const std::vector<int>& pred, const std::vector<int>& gold,
                           const Vocab& vocab) {
  return span_em_f1(vocab.decode(pred), vocab.decode(gold));
}

}  // namespace tcat
