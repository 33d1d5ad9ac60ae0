#include <cmath>

#include "doctest.h"
#include "tcat/metrics.hpp"
#include "tcat/rng.hpp"

using namespace tcat;

namespace {

using Toks = std::vector<std::string>;

// exponential subsequence enumeration, the independent LCS oracle
std::size_t brute_force_lcs(const Toks& a, const Toks& b) {
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (std::size_t mask = 0; mask < (1u << n); ++mask) {
    Toks sub;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) sub.push_back(a[i]);
    if (sub.size() <= best) continue;
    std::size_t pos = 0;
    bool is_sub = true;
    for (const auto& t : sub) {
      while (pos < b.size() && b[pos] != t) ++pos;
      if (pos == b.size()) {
        is_sub = false;
        break;
      }
      ++pos;
    }
    if (is_sub) best = sub.size();
  }
  return best;
}

Toks random_toks(Rng& rng, std::size_t max_len, int alphabet) {
  Toks out;
  std::size_t len = 1 + rng.below(max_len);
  for (std::size_t i = 0; i < len; ++i)
    out.push_back(std::string(1, static_cast<char>('a' + rng.below(alphabet))));
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("rouge_n hand cases") {
  Toks cand{"the", "cat"};
  Toks ref{"the", "cat", "sat"};
  Prf r1 = rouge_n(cand, ref, 1);
  CHECK(r1.precision == doctest::Approx(1.0));
  CHECK(r1.recall == doctest::Approx(2.0 / 3.0));
  CHECK(r1.f1 == doctest::Approx(0.8));

  Prf r2 = rouge_n(cand, ref, 2);
  CHECK(r2.precision == doctest::Approx(1.0));
  CHECK(r2.recall == doctest::Approx(0.5));
  CHECK(r2.f1 == doctest::Approx(2.0 / 3.0));

  Prf same = rouge_n(ref, ref, 1);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  CHECK(same.f1 == 1.0);

  Prf empty = rouge_n({}, ref, 1);
  CHECK(empty.f1 == 0.0);

  // case folding on by default
  CHECK(rouge_n({"The"}, {"the"}, 1).f1 == 1.0);
  CHECK(rouge_n({"The"}, {"the"}, 1, false).f1 == 0.0);
  CHECK_THROWS_AS((void)rouge_n(cand, ref, 0), std::invalid_argument);
}

TEST_CASE("rouge_l: disjoint, hand LCS, dp equals brute force up to length 10") {
  CHECK(rouge_l({"x", "y"}, {"a", "b"}).f1 == 0.0);

  Prf h = rouge_l({"a", "c", "b"}, {"a", "b", "c"});
  CHECK(h.precision == doctest::Approx(2.0 / 3.0));
  CHECK(h.recall == doctest::Approx(2.0 / 3.0));
  CHECK(h.f1 == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS_AS((void)rouge_l({"a"}, {}), std::invalid_argument);

  Rng rng(3);
  for (int rep = 0; rep < 300; ++rep) {
    Toks a = random_toks(rng, 10, 4);
    Toks b = random_toks(rng, 10, 4);
    CHECK(lcs_length(a, b) == brute_force_lcs(a, b));
  }
}

TEST_CASE("bleu: identity corpus, brevity penalty, zero precision") {
  std::vector<Toks> refs{{"the", "cat", "sat", "down"}, {"a", "b", "c", "d", "e"}};
  CHECK(bleu(refs, refs) == doctest::Approx(100.0));

  // cand length 2 vs ref length 4 with perfect 1/2-gram precision:
  // score = 100 * e^{-1} at max_n = 2
  std::vector<Toks> cand{{"the", "cat"}};
  std::vector<Toks> ref{{"the", "cat", "sat", "down"}};
  double s = bleu(cand, ref, 2);
  CHECK(std::abs(s - 100.0 * std::exp(-1.0)) < 1e-9);

  // any zero n-gram precision at corpus level zeroes the score
  std::vector<Toks> miss{{"dog", "ran"}};
  CHECK(bleu(miss, ref, 2) == 0.0);
  // smoothing flag lifts it off zero for tiny corpora
  CHECK(bleu(miss, ref, 2, true) > 0.0);

  CHECK_THROWS_AS((void)bleu({}, {}), std::invalid_argument);
  CHECK_THROWS_AS((void)bleu(cand, refs), std::invalid_argument);
}

TEST_CASE("bleu is 100 exactly when the corpus matches, lower otherwise") {
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<Toks> refs;
    for (int s = 0; s < 4; ++s) {
      Toks line = random_toks(rng, 6, 5);
      while (line.size() < 4) line.push_back("pad");
      refs.push_back(line);
    }
    CHECK(bleu(refs, refs) == doctest::Approx(100.0));
    std::vector<Toks> pert = refs;
    pert[0][0] = "zzz";
    double s = bleu(pert, refs);
    CHECK(s < 100.0);
    CHECK(s >= 0.0);
  }
}

TEST_CASE("span em/f1 hand cases") {
  EmF1 exact = span_em_f1({"a", "b"}, {"a", "b"});
  CHECK(exact.em == 1.0);
  CHECK(exact.f1 == 1.0);

  EmF1 half = span_em_f1({"a"}, {"a", "b"});
  CHECK(half.em == 0.0);
  CHECK(half.f1 == doctest::Approx(2.0 / 3.0));

  EmF1 none = span_em_f1({}, {"a"});
  CHECK(none.em == 0.0);
  CHECK(none.f1 == 0.0);

  CHECK_THROWS_AS((void)span_em_f1({"a"}, {}), std::invalid_argument);
}

TEST_CASE("accuracy") {
  CHECK(accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
  CHECK(accuracy({1, 2, 3}, {4, 5, 6}) == 0.0);
  CHECK(accuracy({1, 2, 3, 4}, {1, 2, 3, 9}) == 0.75);
  CHECK_THROWS_AS((void)accuracy({1}, {1, 2}), std::invalid_argument);
  CHECK_THROWS_AS((void)accuracy({}, {}), std::invalid_argument);
}

TEST_CASE("metric bounds on random corpora") {
  Rng rng(7);
  for (int rep = 0; rep < 30; ++rep) {
    Toks a = random_toks(rng, 8, 4);
    Toks b = random_toks(rng, 8, 4);
    for (std::size_t n : {1u, 2u}) {
      Prf r = rouge_n(a, b, n);
      CHECK(r.precision >= 0.0);
      CHECK(r.precision <= 1.0);
      CHECK(r.recall >= 0.0);
      CHECK(r.recall <= 1.0);
      CHECK(r.f1 >= 0.0);
      CHECK(r.f1 <= 1.0);
    }
    double s = bleu({a}, {b}, 2, true);
    CHECK(s >= 0.0);
    CHECK(s <= 100.0);
  }
}

TEST_SUITE_END();
