#include "mmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <unordered_map>

#include "mmt/error.hpp"

namespace mmt {

namespace {

constexpr std::size_t kMaxShiftLength = 10;

void check_aligned(std::span<const Sentence> hyps, std::span<const Sentence> refs, const char* metric) {
  if (hyps.size() != refs.size()) {
    throw Error(Errc::misaligned, std::string(metric) + ": " + std::to_string(hyps.size()) + " hypotheses vs " +
                                      std::to_string(refs.size()) + " references");
  }
}

std::unordered_map<std::string, std::size_t> ngram_counts(std::span<const std::string> words, std::size_t n) {
  std::unordered_map<std::string, std::size_t> counts;
  if (words.size() < n) return counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      key += words[i + k];
      key += '\x1f';
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (std::size_t n = 0; n < 4; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  hyp_len += other.hyp_len;
  ref_len += other.ref_len;
  return *this;
}

BleuStats bleu_stats(std::span<const std::string> hyp, std::span<const std::string> ref) {
  BleuStats s;
  s.hyp_len = hyp.size();
  s.ref_len = ref.size();
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto h = ngram_counts(hyp, n);
    const auto r = ngram_counts(ref, n);
    for (const auto& [gram, count] : h) {
      s.totals[n - 1] += count;
      if (auto it = r.find(gram); it != r.end()) s.matches[n - 1] += std::min(count, it->second);
    }
  }
  return s;
}

double bleu_from_stats(const BleuStats& s) {
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (s.matches[n] == 0 || s.totals[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]));
  }
  const double hyp = static_cast<double>(s.hyp_len), ref = static_cast<double>(s.ref_len);
  const double brevity = hyp < ref ? std::exp(1.0 - ref / hyp) : 1.0;
  return 100.0 * brevity * std::exp(log_sum / 4.0);
}

double bleu_corpus(std::span<const Sentence> hypotheses, std::span<const Sentence> references) {
  check_aligned(hypotheses, references, "bleu");
  if (hypotheses.empty()) throw Error(Errc::empty_input, "bleu: empty corpus");
  BleuStats total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) total += bleu_stats(hypotheses[i], references[i]);
  return bleu_from_stats(total);
}

double sentence_bleu_smoothed(std::span<const std::string> hyp, std::span<const std::string> ref) {
  const BleuStats s = bleu_stats(hyp, ref);
  if (s.hyp_len == 0 || s.matches[0] == 0) return 0.0;
  double log_sum = std::log(static_cast<double>(s.matches[0]) / static_cast<double>(s.totals[0]));
  for (std::size_t n = 1; n < 4; ++n) {
    log_sum += std::log((static_cast<double>(s.matches[n]) + 1.0) / (static_cast<double>(s.totals[n]) + 1.0));
  }
  const double hyp_len = static_cast<double>(s.hyp_len), ref_len = static_cast<double>(s.ref_len);
  const double brevity = hyp_len < ref_len ? std::exp(1.0 - ref_len / hyp_len) : 1.0;
  return 100.0 * brevity * std::exp(log_sum / 4.0);
}

std::size_t edit_distance(std::span<const std::string> hyp, std::span<const std::string> ref) {
  std::vector<std::size_t> prev(ref.size() + 1), cur(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[ref.size()];
}

namespace {

// Hypothesis positions that an optimal Levenshtein alignment matches to an
// identical reference word.
std::vector<bool> matched_positions(std::span<const std::string> hyp, std::span<const std::string> ref) {
  const std::size_t n = hyp.size(), m = ref.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      at(i, j) = std::min({at(i - 1, j - 1) + (hyp[i - 1] == ref[j - 1] ? 0 : 1), at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  std::vector<bool> matched(n, false);
  std::size_t i = n, j = m;
  while (i > 0 && j > 0) {
    if (hyp[i - 1] == ref[j - 1] && at(i, j) == at(i - 1, j - 1)) {
      matched[i - 1] = true;
      --i;
      --j;
    } else if (at(i, j) == at(i - 1, j - 1) + 1) {
      --i;
      --j;
    } else if (at(i, j) == at(i - 1, j) + 1) {
      --i;
    } else {
      --j;
    }
  }
  return matched;
}

bool occurs_in(std::span<const std::string> block, std::span<const std::string> ref) {
  if (block.size() > ref.size()) return false;
  for (std::size_t j = 0; j + block.size() <= ref.size(); ++j) {
    if (std::equal(block.begin(), block.end(), ref.begin() + static_cast<std::ptrdiff_t>(j))) return true;
  }
  return false;
}

// Moves words[start, start+len) so that it begins at index `dest` of the result.
Sentence apply_shift(std::span<const std::string> words, std::size_t start, std::size_t len, std::size_t dest) {
  Sentence rest;
  rest.reserve(words.size());
  for (std::size_t k = 0; k < words.size(); ++k) {
    if (k < start || k >= start + len) rest.push_back(words[k]);
  }
  Sentence out(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(dest));
  out.insert(out.end(), words.begin() + static_cast<std::ptrdiff_t>(start),
             words.begin() + static_cast<std::ptrdiff_t>(start + len));
  out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(dest), rest.end());
  return out;
}

}  // namespace

TerStats ter_sentence(std::span<const std::string> hyp, std::span<const std::string> ref) {
  TerStats stats;
  stats.ref_len = ref.size();
  Sentence cur(hyp.begin(), hyp.end());
  std::size_t base = edit_distance(cur, ref);
  while (base > 1) {
    const std::vector<bool> matched = matched_positions(cur, ref);
    std::size_t best_dist = base;
    std::tuple<std::size_t, std::size_t, std::size_t> best{};
    bool found = false;
    for (std::size_t start = 0; start < cur.size(); ++start) {
      for (std::size_t len = 1; len <= kMaxShiftLength && start + len <= cur.size(); ++len) {
        std::span<const std::string> block(cur.data() + start, len);
        if (!occurs_in(block, ref)) break;
        if (std::all_of(matched.begin() + static_cast<std::ptrdiff_t>(start),
                        matched.begin() + static_cast<std::ptrdiff_t>(start + len), [](bool b) { return b; })) {
          continue;
        }
        const std::size_t rest = cur.size() - len;
        // Destinations ordered by distance from the original position.
        std::vector<std::size_t> dests;
        for (std::size_t dest = 0; dest <= rest; ++dest) {
          if (dest != start) dests.push_back(dest);
        }
        std::stable_sort(dests.begin(), dests.end(), [start](std::size_t a, std::size_t b) {
          const auto da = a > start ? a - start : start - a;
          const auto db = b > start ? b - start : start - b;
          return da < db;
        });
        for (std::size_t dest : dests) {
          const std::size_t dist = edit_distance(apply_shift(cur, start, len, dest), ref);
          if (dist + 1 < base && dist < best_dist) {
            best_dist = dist;
            best = {start, len, dest};
            found = true;
          }
        }
      }
    }
    if (!found) break;
    cur = apply_shift(cur, std::get<0>(best), std::get<1>(best), std::get<2>(best));
    ++stats.shifts;
    base = best_dist;
  }
  stats.edits = stats.shifts + base;
  return stats;
}

double ter_corpus(std::span<const Sentence> hypotheses, std::span<const Sentence> references) {
  check_aligned(hypotheses, references, "ter");
  std::size_t edits = 0, ref_len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const TerStats s = ter_sentence(hypotheses[i], references[i]);
    edits += s.edits;
    ref_len += s.ref_len;
  }
  if (ref_len == 0) throw Error(Errc::empty_input, "ter: references contain no tokens");
  return 100.0 * static_cast<double>(edits) / static_cast<double>(ref_len);
}

double length_ratio(std::span<const Sentence> hypotheses, std::span<const Sentence> references) {
  check_aligned(hypotheses, references, "length_ratio");
  std::size_t hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    hyp_len += hypotheses[i].size();
    ref_len += references[i].size();
  }
  if (ref_len == 0) throw Error(Errc::empty_input, "length_ratio: references contain no tokens");
  return static_cast<double>(hyp_len) / static_cast<double>(ref_len);
}

EvalReport evaluate(std::span<const Sentence> hypotheses, std::span<const Sentence> references) {
  return {bleu_corpus(hypotheses, references), ter_corpus(hypotheses, references),
          length_ratio(hypotheses, references), hypotheses.size()};
}

}  // namespace mmt
