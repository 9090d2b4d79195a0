#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "mmt/beam.hpp"
#include "mmt/corpus.hpp"
#include "mmt/metrics.hpp"
#include "mmt/model.hpp"
#include "mmt/vocab.hpp"

namespace mmt {

/// Adapts a frozen model and one source sentence to the StepScorer interface.
/// Owns an inference-mode tape; not safe to share across threads.
class NmtScorer {
 public:
  using State = DecoderState;

  /// `image` must be non-empty for osu1 and is ignored by osu2.
  NmtScorer(const ModelParams& params, std::span<const int> source, std::span<const float> image);

  State initial_state() const { return initial_; }
  std::pair<std::vector<double>, State> advance(const State& state, int token) const;
  int bos_id() const { return kBosId; }
  int eos_id() const { return kEosId; }

 private:
  const ModelParams& params_;
  std::unique_ptr<Tape> tape_;
  EncoderStates encoder_;
  State initial_;
};

std::vector<int> greedy_decode(const ModelParams& params, std::span<const int> source, std::span<const float> image,
                               std::size_t max_len_cap = 100);

ScoredOutput beam_search(const ModelParams& params, std::span<const int> source, std::span<const float> image,
                         const BeamConfig& cfg);

/// Beam-decodes every source of the corpus, in order.
std::vector<ScoredOutput> translate_corpus(const ModelParams& params, const Corpus& corpus, const BeamConfig& cfg);

/// Token strings of each output, EOS and BOS dropped.
std::vector<Sentence> detokenize(const Vocabulary& vocab, std::span<const ScoredOutput> outputs);

struct SweepRecord {
  std::size_t beam = 0;
  double reward = 0.0;
  double bleu = 0.0;
  double length_ratio = 0.0;
  double seconds = 0.0;
};

/// Decodes the corpus for every (beam, reward) cell and scores it against
/// `references`. Cells are visited beam-major in the given order.
std::vector<SweepRecord> sweep(const ModelParams& params, const Corpus& corpus, const Vocabulary& tgt_vocab,
                               std::span<const Sentence> references, std::span<const std::size_t> beams,
                               std::span<const double> rewards, const BeamConfig& base = {});

/// CSV with header beam,reward,bleu,length_ratio,seconds.
void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRecord> records);

}  // namespace mmt
