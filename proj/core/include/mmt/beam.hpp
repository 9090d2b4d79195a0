#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "mmt/error.hpp"

namespace mmt {

/// A left-to-right model the decoders can drive. `advance(state, token)`
/// consumes `token` and returns the log-probabilities of the next token
/// together with the successor state.
template <class S>
concept StepScorer = requires(const S& s, const typename S::State& state, int token) {
  { s.initial_state() } -> std::convertible_to<typename S::State>;
  { s.advance(state, token) } -> std::same_as<std::pair<std::vector<double>, typename S::State>>;
  { s.bos_id() } -> std::convertible_to<int>;
  { s.eos_id() } -> std::convertible_to<int>;
};

struct BeamConfig {
  std::size_t beam_size = 5;
  double reward = 0.1;
  double length_bound_ratio = 1.5;
  std::size_t max_len_cap = 100;

  void validate() const {
    if (beam_size < 1) throw Error(Errc::invalid_config, "beam size must be at least 1");
    if (!(reward >= 0.0) || !std::isfinite(reward)) throw Error(Errc::invalid_config, "reward must be finite and >= 0");
    if (!(length_bound_ratio > 0.0)) throw Error(Errc::invalid_config, "length bound ratio must be positive");
    if (max_len_cap < 1) throw Error(Errc::invalid_config, "max_len_cap must be at least 1");
  }

  /// Length up to which each emitted token earns the reward: ceil(ratio * |source|), capped.
  std::size_t bound(std::size_t source_len) const {
    const auto b = static_cast<std::size_t>(std::ceil(length_bound_ratio * static_cast<double>(source_len)));
    return std::min(b, max_len_cap);
  }

  friend bool operator==(const BeamConfig&, const BeamConfig&) = default;
};

/// Decoder output. `tokens` excludes BOS and EOS; `finished` records whether
/// EOS was emitted (otherwise the output was cut at max_len_cap).
struct ScoredOutput {
  std::vector<int> tokens;
  double log_prob = 0.0;
  double reward_score = 0.0;
  bool finished = false;

  friend bool operator==(const ScoredOutput&, const ScoredOutput&) = default;
};

inline double reward_score(double log_prob, std::size_t length, std::size_t bound, double reward) {
  return log_prob + reward * static_cast<double>(std::min(length, bound));
}

/// Pool order: higher reward score, then shorter, then smaller ids.
inline bool better_output(const ScoredOutput& a, const ScoredOutput& b) {
  if (a.reward_score != b.reward_score) return a.reward_score > b.reward_score;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

/// Argmax decoding; ties go to the lowest id. Stops at EOS or after
/// `max_len_cap` tokens.
template <StepScorer S>
std::vector<int> greedy_decode(const S& scorer, std::size_t max_len_cap) {
  std::vector<int> out;
  auto [log_probs, state] = scorer.advance(scorer.initial_state(), scorer.bos_id());
  while (out.size() < max_len_cap) {
    const auto best = std::max_element(log_probs.begin(), log_probs.end());
    const int token = static_cast<int>(best - log_probs.begin());
    if (token == scorer.eos_id()) break;
    out.push_back(token);
    auto next = scorer.advance(state, token);
    log_probs = std::move(next.first);
    state = std::move(next.second);
  }
  return out;
}

/// Beam search over reward-adjusted scores log p + r * min(len, B).
///
/// Every step expands each live hypothesis by every token and keeps the best
/// `beam_size` candidates overall (score, then id order). Candidates ending in
/// EOS move to the finished pool. The search stops when the beam empties, when
/// the best finished score reaches the optimistic bound log p + r * B of every
/// live hypothesis (future log-probabilities are <= 0 and the reward is capped
/// at B), or after max_len_cap steps, in which case live hypotheses join the
/// pool unfinished. Returns the pool maximum under better_output.
template <StepScorer S>
ScoredOutput beam_search(const S& scorer, std::size_t source_len, const BeamConfig& cfg) {
  cfg.validate();
  using State = typename S::State;
  const std::size_t bound = cfg.bound(source_len);
  const double r = cfg.reward;
  const int eos = scorer.eos_id();

  struct Live {
    std::vector<int> tokens;
    double log_prob;
    std::vector<double> next_log_probs;
    State state;
  };
  struct Candidate {
    std::size_t parent;
    int token;
    double log_prob;
    double score;
  };

  std::vector<Live> beam;
  {
    auto [lp, st] = scorer.advance(scorer.initial_state(), scorer.bos_id());
    beam.push_back(Live{{}, 0.0, std::move(lp), std::move(st)});
  }
  std::vector<ScoredOutput> pool;
  std::optional<double> best_finished;

  // Candidate order: score, then lexicographic on the extended token sequence.
  // Live hypotheses always share one length, so comparing parents then the
  // new token is lexicographic order.
  auto before = [&beam](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.parent != b.parent) return beam[a.parent].tokens < beam[b.parent].tokens;
    return a.token < b.token;
  };

  for (std::size_t step = 0; step < cfg.max_len_cap && !beam.empty(); ++step) {
    std::vector<Candidate> candidates;
    for (std::size_t hi = 0; hi < beam.size(); ++hi) {
      const Live& h = beam[hi];
      std::vector<Candidate> local;
      local.reserve(h.next_log_probs.size());
      for (std::size_t v = 0; v < h.next_log_probs.size(); ++v) {
        const int token = static_cast<int>(v);
        const double lp = h.log_prob + h.next_log_probs[v];
        const std::size_t len = h.tokens.size() + (token == eos ? 0 : 1);
        local.push_back({hi, token, lp, reward_score(lp, len, bound, r)});
      }
      // Only a hypothesis' own top beam_size candidates can survive the global cut.
      if (local.size() > cfg.beam_size) {
        std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(cfg.beam_size), local.end(), before);
        local.resize(cfg.beam_size);
      }
      candidates.insert(candidates.end(), local.begin(), local.end());
    }
    const std::size_t keep = std::min(cfg.beam_size, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(), before);
    candidates.resize(keep);

    std::vector<Live> next;
    for (const Candidate& c : candidates) {
      const Live& parent = beam[c.parent];
      if (c.token == eos) {
        pool.push_back({parent.tokens, c.log_prob, c.score, true});
        if (!best_finished || c.score > *best_finished) best_finished = c.score;
        continue;
      }
      auto [lp, st] = scorer.advance(parent.state, c.token);
      std::vector<int> tokens = parent.tokens;
      tokens.push_back(c.token);
      next.push_back(Live{std::move(tokens), c.log_prob, std::move(lp), std::move(st)});
    }
    beam = std::move(next);

    if (best_finished && !beam.empty()) {
      double optimistic = -HUGE_VAL;
      for (const Live& h : beam) optimistic = std::max(optimistic, h.log_prob + r * static_cast<double>(bound));
      if (*best_finished >= optimistic) {
        beam.clear();
        break;
      }
    }
  }
  for (Live& h : beam) {
    const double score = reward_score(h.log_prob, h.tokens.size(), bound, r);
    pool.push_back({std::move(h.tokens), h.log_prob, score, false});
  }
  return *std::min_element(pool.begin(), pool.end(), better_output);
}

}  // namespace mmt
