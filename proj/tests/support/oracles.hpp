#pragma once

// Test-only reference implementations. Each one is written independently of
// the library code path it checks: brute-force enumeration instead of search,
// explicit n-gram maps instead of hashed keys, exhaustive shift search instead
// of the greedy TER loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mmt/beam.hpp"
#include "mmt/rng.hpp"

namespace mmt::testing {

/// Prefix-conditioned categorical model over {0, 1, 2, EOS=3}. Log-probabilities
/// are a pure function of (seed, prefix). After `max_len` content tokens only
/// EOS has non-zero probability.
class TabularScorer {
 public:
  using State = std::vector<int>;

  explicit TabularScorer(std::uint64_t seed, std::size_t max_len = 4, double spread = 1.5)
      : seed_(seed), max_len_(max_len), spread_(spread) {}

  State initial_state() const { return {}; }
  int bos_id() const { return -1; }
  int eos_id() const { return 3; }
  static constexpr int vocab_size() { return 4; }

  std::pair<std::vector<double>, State> advance(const State& prefix, int token) const {
    State next = prefix;
    if (token != bos_id()) next.push_back(token);
    return {log_probs(next), next};
  }

  std::vector<double> log_probs(const State& prefix) const {
    const double ninf = -std::numeric_limits<double>::infinity();
    if (prefix.size() >= max_len_) return {ninf, ninf, ninf, 0.0};
    std::uint64_t key = seed_ * 0x9e3779b97f4a7c15ull + 17;
    for (int t : prefix) key = key * 31 + static_cast<std::uint64_t>(t + 1);
    key = key * 31 + prefix.size();
    Rng rng(key, "tabular");
    std::vector<double> logits(4);
    for (double& v : logits) v = spread_ * rng.normal();
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    for (double& v : logits) v = v - mx - std::log(z);
    return logits;
  }

  /// Sum of log-probabilities of `tokens` followed by EOS.
  double sequence_log_prob(const std::vector<int>& tokens) const {
    double lp = 0.0;
    State prefix;
    for (int t : tokens) {
      lp += log_probs(prefix)[static_cast<std::size_t>(t)];
      prefix.push_back(t);
    }
    return lp + log_probs(prefix)[3];
  }

  std::size_t max_len() const { return max_len_; }

 private:
  std::uint64_t seed_;
  std::size_t max_len_;
  double spread_;
};

/// Scores every EOS-terminated sequence of at most max_len content tokens and
/// returns the best under (reward score, shorter, lexicographic).
inline ScoredOutput brute_force_argmax(const TabularScorer& model, std::size_t bound, double reward) {
  std::vector<std::vector<int>> frontier = {{}};
  std::vector<std::vector<int>> all = {{}};
  for (std::size_t len = 1; len <= model.max_len(); ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& s : frontier) {
      for (int t = 0; t < 3; ++t) {
        auto e = s;
        e.push_back(t);
        next.push_back(e);
      }
    }
    all.insert(all.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  ScoredOutput best;
  bool have = false;
  for (const auto& s : all) {
    const double lp = model.sequence_log_prob(s);
    const double score = lp + reward * static_cast<double>(std::min(s.size(), bound));
    const bool better = !have || score > best.reward_score ||
                        (score == best.reward_score &&
                         (s.size() < best.tokens.size() || (s.size() == best.tokens.size() && s < best.tokens)));
    if (better) {
      best = {s, lp, score, true};
      have = true;
    }
  }
  return best;
}

/// BLEU computed from explicit n-gram maps and a direct product of precisions.
inline double brute_force_bleu(const std::vector<std::vector<std::string>>& hyps,
                               const std::vector<std::vector<std::string>>& refs) {
  double matches[4] = {0, 0, 0, 0}, totals[4] = {0, 0, 0, 0};
  double hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    hyp_len += static_cast<double>(hyps[i].size());
    ref_len += static_cast<double>(refs[i].size());
    for (std::size_t n = 1; n <= 4; ++n) {
      std::map<std::vector<std::string>, int> h, r;
      for (std::size_t k = 0; k + n <= hyps[i].size(); ++k) {
        ++h[std::vector<std::string>(hyps[i].begin() + static_cast<long>(k), hyps[i].begin() + static_cast<long>(k + n))];
      }
      for (std::size_t k = 0; k + n <= refs[i].size(); ++k) {
        ++r[std::vector<std::string>(refs[i].begin() + static_cast<long>(k), refs[i].begin() + static_cast<long>(k + n))];
      }
      for (const auto& [g, c] : h) {
        totals[n - 1] += c;
        auto it = r.find(g);
        if (it != r.end()) matches[n - 1] += std::min(c, it->second);
      }
    }
  }
  double product = 1.0;
  for (int n = 0; n < 4; ++n) {
    if (matches[n] == 0 || totals[n] == 0) return 0.0;
    product *= matches[n] / totals[n];
  }
  const double bp = hyp_len < ref_len ? std::exp(1.0 - ref_len / hyp_len) : 1.0;
  return 100.0 * bp * std::pow(product, 0.25);
}

inline std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    }
  }
  return d[a.size()][b.size()];
}

/// Minimum over every sequence of unconstrained block moves of
/// (number of moves + remaining edit distance).
inline std::size_t exhaustive_ter_edits(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  std::size_t best = levenshtein(hyp, ref);
  std::set<std::vector<std::string>> seen = {hyp};
  std::vector<std::vector<std::string>> layer = {hyp};
  for (std::size_t moves = 1; moves < best; ++moves) {
    std::vector<std::vector<std::string>> next;
    for (const auto& cur : layer) {
      const std::size_t n = cur.size();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t len = 1; i + len <= n; ++len) {
          std::vector<std::string> block(cur.begin() + static_cast<long>(i), cur.begin() + static_cast<long>(i + len));
          std::vector<std::string> rest;
          for (std::size_t k = 0; k < n; ++k) {
            if (k < i || k >= i + len) rest.push_back(cur[k]);
          }
          for (std::size_t dest = 0; dest <= rest.size(); ++dest) {
            std::vector<std::string> moved(rest.begin(), rest.begin() + static_cast<long>(dest));
            moved.insert(moved.end(), block.begin(), block.end());
            moved.insert(moved.end(), rest.begin() + static_cast<long>(dest), rest.end());
            if (seen.insert(moved).second) {
              best = std::min(best, moves + levenshtein(moved, ref));
              next.push_back(std::move(moved));
            }
          }
        }
      }
    }
    layer = std::move(next);
  }
  return best;
}

}  // namespace mmt::testing
