#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace mmt {

using Sentence = std::vector<std::string>;

/// Clipped n-gram match counts of one hypothesis against one reference.
struct BleuStats {
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  BleuStats& operator+=(const BleuStats& other);
};

BleuStats bleu_stats(std::span<const std::string> hyp, std::span<const std::string> ref);

/// BLEU (0..100) from pooled statistics: uniform-weight geometric mean of the
/// four modified precisions times the brevity penalty. Any zero precision
/// gives 0; there is no smoothing.
double bleu_from_stats(const BleuStats& stats);

/// Corpus BLEU with a single reference per hypothesis.
double bleu_corpus(std::span<const Sentence> hypotheses, std::span<const Sentence> references);

/// Sentence-level BLEU with add-one smoothing on orders 2..4. For debugging
/// output only; corpus scores never use it.
double sentence_bleu_smoothed(std::span<const std::string> hyp, std::span<const std::string> ref);

/// Word-level Levenshtein distance with unit costs.
std::size_t edit_distance(std::span<const std::string> hyp, std::span<const std::string> ref);

struct TerStats {
  std::size_t edits = 0;   ///< insertions + deletions + substitutions + shifts
  std::size_t shifts = 0;
  std::size_t ref_len = 0;
};

/// Greedy TER alignment of one sentence. Each round applies the block shift
/// with the largest net reduction in edits (ties: leftmost, then shortest,
/// then nearest destination); a shift is only taken when it strictly lowers
/// the total including its own cost. Shifted blocks must occur verbatim in the
/// reference and contain at least one word not already matched in place.
TerStats ter_sentence(std::span<const std::string> hyp, std::span<const std::string> ref);

/// Total edits over total reference tokens, times 100.
double ter_corpus(std::span<const Sentence> hypotheses, std::span<const Sentence> references);

/// Total hypothesis tokens over total reference tokens.
double length_ratio(std::span<const Sentence> hypotheses, std::span<const Sentence> references);

struct EvalReport {
  double bleu = 0.0;
  double ter = 0.0;
  double length_ratio = 0.0;
  std::size_t sentences = 0;
};

EvalReport evaluate(std::span<const Sentence> hypotheses, std::span<const Sentence> references);

}  // namespace mmt
