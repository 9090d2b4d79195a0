#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mmt/corpus.hpp"
#include "mmt/model.hpp"
#include "mmt/vocab.hpp"

namespace mmt {

enum class SelectionMetric { dev_loss, dev_bleu };

struct TrainConfig {
  double learning_rate = 1.0;
  std::size_t batch_size = 64;
  double dropout_rate = 0.6;
  std::size_t max_epochs = 15;
  std::optional<double> clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t patience = 3;
  SelectionMetric selection = SelectionMetric::dev_loss;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;      ///< 1-based
  double train_loss = 0.0;    ///< mean per-token NLL over the epoch
  double dev_loss = 0.0;
  double dev_perplexity = 0.0;
  std::optional<double> dev_bleu;  ///< greedy dev BLEU, only with SelectionMetric::dev_bleu
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t selected_epoch = 0;  ///< 1-based

  /// One JSON object per epoch, newline separated. Without timing the output
  /// depends only on the inputs and seeds.
  std::string to_jsonl(bool with_timing = true) const;
};

struct TrainResult {
  ModelParams best;
  TrainReport report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Teacher-forced SGD training with dev-based model selection and early
/// stopping after `patience` epochs without improvement. The dropout rate of
/// `train_cfg` overrides the one in `model_cfg`. Needs `tgt_vocab` only for
/// dev-BLEU selection.
TrainResult train(const ModelConfig& model_cfg, const Corpus& train_corpus, const Corpus& dev_corpus,
                  const TrainConfig& train_cfg, const Vocabulary* tgt_vocab = nullptr,
                  const EpochCallback& on_epoch = {});

/// Mean per-token NLL of the corpus in inference mode.
double dev_loss(const ModelParams& params, const Corpus& dev_corpus, std::size_t batch_size = 64);

/// Throws Error(Errc::vocab_mismatch) when the corpus holds ids the model cannot embed.
void check_vocab_compatible(const ModelParams& params, const Corpus& corpus);

}  // namespace mmt
