#pragma once

// Tokenization, vocabulary, noise synthesis for unsupervised compression
// training, synthetic labeled-pair generation, and dataset file IO.
//
// File formats:
//   corpus  : UTF-8 text, one sequence per line
//   pairs   : input TAB target, one pair per line
//   vocab   : one token per line, line number = id (reserved ids first)

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tcat/checkpoint.hpp"  // DataError
#include "tcat/rng.hpp"
#include "tcat/special.hpp"

namespace tcat {

// ---------------------------------------------------------------------------
// tokenization

inline std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Whitespace split with leading/trailing punctuation detached as separate
// single-character tokens. Interior punctuation stays attached.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    const std::string chunk = text.substr(i, j - i);
    i = j;
    std::size_t b = 0, e = chunk.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(chunk[b]))) {
      out.emplace_back(1, chunk[b]);
      ++b;
    }
    std::size_t trail_start = e;
    while (trail_start > b && std::ispunct(static_cast<unsigned char>(chunk[trail_start - 1])))
      --trail_start;
    if (trail_start > b) out.push_back(chunk.substr(b, trail_start - b));
    for (std::size_t t = trail_start; t < e; ++t) out.emplace_back(1, chunk[t]);
  }
  return out;
}

inline bool is_closing_punct(const std::string& t) {
  return t.size() == 1 && std::string(".,;:!?)]}").find(t[0]) != std::string::npos;
}

inline bool is_opening_punct(const std::string& t) {
  return t.size() == 1 && std::string("([{").find(t[0]) != std::string::npos;
}

// Space join with punctuation reattached, so tokenize o detokenize only
// normalizes whitespace.
inline std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  bool glue_next = false;
  for (const std::string& t : tokens) {
    if (!out.empty() && !glue_next && !is_closing_punct(t)) out += ' ';
    out += t;
    glue_next = is_opening_punct(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// vocabulary

class Vocab {
 public:
  Vocab() {
    for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>", "<cls>", "<sep>"}) add(t);
  }

  int add(const std::string& tok) {
    auto it = tok2id_.find(tok);
    if (it != tok2id_.end()) return it->second;
    int id = static_cast<int>(id2tok_.size());
    id2tok_.push_back(tok);
    tok2id_.emplace(tok, id);
    return id;
  }

  int id(const std::string& tok) const {
    auto it = tok2id_.find(tok);
    return it == tok2id_.end() ? special::kUnk : it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id2tok_.size())
      throw std::out_of_range("Vocab::token: id out of range");
    return id2tok_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const { return id2tok_.size(); }

  std::vector<int> encode(const std::vector<std::string>& toks) const {
    std::vector<int> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(id(t));
    return out;
  }

  std::vector<std::string> decode(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int i : ids) out.push_back(token(i));
    return out;
  }

  // Frequency-ordered vocabulary; ties break alphabetically so builds are
  // deterministic. max_size of 0 means unlimited.
  static Vocab build(const std::vector<std::vector<std::string>>& corpus,
                     std::size_t max_size = 0) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& line : corpus)
      for (const auto& tok : line) ++counts[tok];
    std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocab v;
    for (const auto& [tok, cnt] : ordered) {
      if (max_size && v.size() >= max_size) break;
      v.add(tok);
    }
    return v;
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("vocab: cannot open for write: " + path);
    for (const auto& t : id2tok_) os << t << '\n';
  }

  static Vocab load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("vocab: cannot open: " + path);
    Vocab v;
    std::string line;
    int id = 0;
    while (std::getline(is, line)) {
      if (id < special::kReservedCount) {
        if (line != v.id2tok_[static_cast<std::size_t>(id)])
          throw DataError("vocab: reserved token mismatch at line " + std::to_string(id));
      } else {
        v.add(line);
      }
      ++id;
    }
    if (id < special::kReservedCount) throw DataError("vocab: file too short: " + path);
    return v;
  }

 private:
  std::vector<std::string> id2tok_;
  std::unordered_map<std::string, int> tok2id_;
};

// ---------------------------------------------------------------------------
// noise synthesis

struct NoiseConfig {
  enum class Shuffle { token, sentence };
  double additive_fraction = 0.5;
  Shuffle shuffle_level = Shuffle::token;
  double dropout_p = 0.1;
  std::uint64_t seed = 1;
  int full_stop_id = -1;  // sentence-mode block boundary token

  void validate() const {
    if (additive_fraction < 0.0)
      throw std::invalid_argument("NoiseConfig: additive_fraction must be >= 0");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
      throw std::invalid_argument("NoiseConfig: dropout_p must be in [0,1)");
  }
};

// Appends ceil(fraction |x|) tokens sub-sampled without replacement from
// randomly chosen corpus instances.
inline std::vector<int> noise_additive(const std::vector<int>& x,
                                       const std::vector<std::vector<int>>& corpus,
                                       double fraction, Rng& rng) {
  if (corpus.empty()) throw std::invalid_argument("noise_additive: empty corpus");
  std::vector<int> out = x;
  std::size_t need =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(x.size())));
  while (need > 0) {
    const std::vector<int>& line = corpus[rng.below(corpus.size())];
    if (line.empty()) continue;
    std::vector<std::size_t> pos(line.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
    rng.shuffle(pos);
    std::size_t take = std::min<std::size_t>(need, 1 + rng.below(line.size()));
    pos.resize(take);
    std::sort(pos.begin(), pos.end());
    for (std::size_t p : pos) out.push_back(line[p]);
    need -= take;
  }
  return out;
}

// Token mode permutes tokens uniformly; sentence mode splits on the full
// stop token and permutes whole blocks, keeping each block's inner order.
inline std::vector<int> noise_shuffle(const std::vector<int>& x, NoiseConfig::Shuffle level,
                                      int full_stop_id, Rng& rng) {
  if (x.empty()) throw std::invalid_argument("noise_shuffle: empty input");
  if (level == NoiseConfig::Shuffle::token) {
    std::vector<int> out = x;
    rng.shuffle(out);
    return out;
  }
  std::vector<std::vector<int>> blocks(1);
  for (int t : x) {
    blocks.back().push_back(t);
    if (t == full_stop_id) blocks.emplace_back();
  }
  if (blocks.back().empty()) blocks.pop_back();
  rng.shuffle(blocks);
  std::vector<int> out;
  out.reserve(x.size());
  for (const auto& b : blocks) out.insert(out.end(), b.begin(), b.end());
  return out;
}

// Independent per-token dropout; at least one token always survives.
inline std::vector<int> noise_word_dropout(const std::vector<int>& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("noise_word_dropout: p must be in [0,1)");
  std::vector<int> out;
  out.reserve(x.size());
  for (int t : x)
    if (!rng.bernoulli(p)) out.push_back(t);
  if (out.empty() && !x.empty()) out.push_back(x[rng.below(x.size())]);
  return out;
}

// Parallel pseudo pair for unsupervised compression training: the noisy
// extension is the input, the clean original is the target.
inline std::pair<std::vector<int>, std::vector<int>> synthesize_pair(
    const std::vector<int>& x, const std::vector<std::vector<int>>& corpus,
    const NoiseConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<int> noisy = noise_additive(x, corpus, cfg.additive_fraction, rng);
  noisy = noise_shuffle(noisy, cfg.shuffle_level, cfg.full_stop_id, rng);
  noisy = noise_word_dropout(noisy, cfg.dropout_p, rng);
  return {std::move(noisy), x};
}

// ---------------------------------------------------------------------------
// synthetic labeled sets

// Keep/drop corpus with a documented rule: token ids below the keyword
// boundary are backbone tokens, everything else is filler, and the target is
// exactly the backbone subsequence in source order.
struct SyntheticSpec {
  std::size_t content_vocab = 194;  // content types; full vocab adds the reserved ids
  double keyword_fraction = 0.25;   // leading fraction of content ids that are backbone types
  std::size_t min_len = 8;
  std::size_t max_len = 14;
  double keep_ratio = 0.4;          // chance a position carries a backbone token

  std::size_t keyword_types() const {
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(keyword_fraction * static_cast<double>(content_vocab)));
  }
  int keyword_lo() const { return special::kReservedCount; }
  int keyword_hi() const { return special::kReservedCount + static_cast<int>(keyword_types()); }
  bool is_keyword(int id) const { return id >= keyword_lo() && id < keyword_hi(); }
  std::size_t total_vocab() const { return special::kReservedCount + content_vocab; }

  void validate() const {
    if (content_vocab < 2 || keyword_types() >= content_vocab)
      throw std::invalid_argument("SyntheticSpec: need both keyword and filler types");
    if (min_len == 0 || max_len < min_len)
      throw std::invalid_argument("SyntheticSpec: bad length range");
    if (keep_ratio <= 0.0 || keep_ratio >= 1.0)
      throw std::invalid_argument("SyntheticSpec: keep_ratio must be in (0,1)");
  }
};

struct PairSample {
  std::vector<int> src, tgt;
};

inline std::vector<PairSample> make_synthetic_supervised_set(const SyntheticSpec& spec,
                                                             std::size_t n,
                                                             std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("make_synthetic_supervised_set: n must be >= 1");
  Rng rng(seed);
  const int kw_lo = spec.keyword_lo(), kw_hi = spec.keyword_hi();
  const int fill_lo = kw_hi, fill_hi = static_cast<int>(spec.total_vocab());
  std::unordered_set<std::string> seen;
  std::vector<PairSample> out;
  std::size_t attempts = 0;
  while (out.size() < n) {
    if (++attempts > 50 * n + 1000)
      throw std::invalid_argument("make_synthetic_supervised_set: sample space too small");
    PairSample p;
    std::size_t len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
    // keyword occurrences within one sample are distinct types while types
    // last; fillers may repeat freely
    std::vector<int> kw_deck(static_cast<std::size_t>(kw_hi - kw_lo));
    for (std::size_t i = 0; i < kw_deck.size(); ++i) kw_deck[i] = kw_lo + static_cast<int>(i);
    rng.shuffle(kw_deck);
    std::size_t kw_used = 0;
    auto next_keyword = [&] {
      if (kw_used == kw_deck.size()) {
        rng.shuffle(kw_deck);
        kw_used = 0;
      }
      return kw_deck[kw_used++];
    };
    for (std::size_t i = 0; i < len; ++i) {
      if (rng.bernoulli(spec.keep_ratio))
        p.src.push_back(next_keyword());
      else
        p.src.push_back(fill_lo + static_cast<int>(rng.below(fill_hi - fill_lo)));
    }
    bool any = false;
    for (int t : p.src) any = any || spec.is_keyword(t);
    if (!any) p.src[rng.below(p.src.size())] = next_keyword();
    for (int t : p.src)
      if (spec.is_keyword(t)) p.tgt.push_back(t);
    std::string key;
    for (int t : p.src) key += std::to_string(t) + ",";
    if (!seen.insert(key).second) continue;  // keep sources unique
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// file IO

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open file: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open file for write: " + path);
  for (const auto& l : lines) os << l << '\n';
}

// pair files: input TAB target
inline std::vector<std::pair<std::string, std::string>> read_pair_lines(
    const std::string& path) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("pair file " + path + ": missing TAB at line " + std::to_string(lineno));
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

}  // namespace tcat
