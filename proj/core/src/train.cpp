#include "mmt/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mmt/decode.hpp"
#include "mmt/error.hpp"
#include "mmt/metrics.hpp"
#include "mmt/optim.hpp"

namespace mmt {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(Errc::invalid_config, "learning_rate must be finite and non-negative");
  }
  if (batch_size < 1) throw Error(Errc::invalid_config, "batch_size must be at least 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(Errc::invalid_config, "dropout_rate must lie in [0, 1)");
  if (max_epochs < 1) throw Error(Errc::invalid_config, "max_epochs must be at least 1");
  if (clip_norm && !(*clip_norm > 0.0)) throw Error(Errc::invalid_config, "clip_norm must be positive");
  if (patience < 1) throw Error(Errc::invalid_config, "patience must be at least 1");
}

std::string TrainReport::to_jsonl(bool with_timing) const {
  std::string out;
  for (const auto& e : epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["dev_loss"] = e.dev_loss;
    j["dev_perplexity"] = e.dev_perplexity;
    if (e.dev_bleu) j["dev_bleu"] = *e.dev_bleu;
    j["selected"] = e.epoch == selected_epoch;
    if (with_timing) j["seconds"] = e.seconds;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void check_vocab_compatible(const ModelParams& params, const Corpus& corpus) {
  const auto& cfg = params.config;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& t = corpus.triples[i];
    for (int id : t.source) {
      if (id < 0 || static_cast<std::size_t>(id) >= cfg.src_vocab_size) {
        throw Error(Errc::vocab_mismatch, "sentence " + std::to_string(i + 1) + ": source id " + std::to_string(id) +
                                              " outside model vocabulary of " + std::to_string(cfg.src_vocab_size));
      }
    }
    for (int id : t.target) {
      if (id < 0 || static_cast<std::size_t>(id) >= cfg.tgt_vocab_size) {
        throw Error(Errc::vocab_mismatch, "sentence " + std::to_string(i + 1) + ": target id " + std::to_string(id) +
                                              " outside model vocabulary of " + std::to_string(cfg.tgt_vocab_size));
      }
    }
  }
  if (cfg.uses_image() && corpus.image_dim != cfg.image_dim) {
    throw Error(Errc::missing_image, "osu1 model expects image features of dimension " + std::to_string(cfg.image_dim) +
                                         ", corpus has " + std::to_string(corpus.image_dim));
  }
}

double dev_loss(const ModelParams& params, const Corpus& dev_corpus, std::size_t batch_size) {
  if (dev_corpus.size() == 0) throw Error(Errc::empty_input, "dev corpus is empty");
  check_vocab_compatible(params, dev_corpus);
  double nll = 0.0, tokens = 0.0;
  std::vector<std::size_t> members;
  for (std::size_t start = 0; start < dev_corpus.size(); start += batch_size) {
    members.resize(std::min(batch_size, dev_corpus.size() - start));
    std::iota(members.begin(), members.end(), start);
    const Batch batch = make_batch(dev_corpus, members);
    nll += sequence_nll_sum(params, batch);
    tokens += batch.token_count();
  }
  return nll / tokens;
}

namespace {

double greedy_bleu(const ModelParams& params, const Corpus& dev, const Vocabulary& vocab) {
  std::vector<Sentence> hyps, refs;
  for (const auto& t : dev.triples) {
    hyps.push_back(vocab.decode(greedy_decode(params, t.source, t.image)));
    refs.push_back(vocab.decode(t.target));
  }
  return bleu_corpus(hyps, refs);
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) { return seed * 1000003ull + epoch; }

}  // namespace

TrainResult train(const ModelConfig& model_cfg, const Corpus& train_corpus, const Corpus& dev_corpus,
                  const TrainConfig& train_cfg, const Vocabulary* tgt_vocab, const EpochCallback& on_epoch) {
  train_cfg.validate();
  if (train_corpus.size() == 0) throw Error(Errc::empty_input, "training corpus is empty");
  if (dev_corpus.size() == 0) throw Error(Errc::empty_input, "dev corpus is empty");
  if (train_cfg.selection == SelectionMetric::dev_bleu && tgt_vocab == nullptr) {
    throw Error(Errc::invalid_config, "dev-BLEU selection needs the target vocabulary");
  }
  ModelConfig cfg = model_cfg;
  cfg.dropout_rate = train_cfg.dropout_rate;
  ModelParams params = init_params(cfg, train_cfg.seed);
  check_vocab_compatible(params, train_corpus);
  check_vocab_compatible(params, dev_corpus);
  const auto list = params.parameters();

  TrainResult result{params, {}};
  double best_score = HUGE_VAL;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto plan = plan_batches(train_corpus, train_cfg.batch_size, epoch_seed(train_cfg.seed, epoch));
    double epoch_nll = 0.0, epoch_tokens = 0.0;
    for (std::size_t b = 0; b < plan.size(); ++b) {
      const Batch batch = make_batch(train_corpus, plan[b]);
      zero_grads(list);
      Tape tape(Mode::training, epoch_seed(train_cfg.seed, epoch) * 65537ull + b);
      tape.track(list);
      Var loss = sequence_loss(tape, params, batch);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw Error(Errc::non_finite, "non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                          std::to_string(b + 1));
      }
      const double tokens = batch.token_count();
      epoch_nll += value * tokens;
      epoch_tokens += tokens;
      tape.backward(loss);
      if (train_cfg.learning_rate > 0.0) {
        try {
          sgd_step(list, train_cfg.learning_rate, train_cfg.clip_norm);
        } catch (const Error& e) {
          throw Error(e.code(), "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1) + ": " + e.what());
        }
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_nll / epoch_tokens;
    rec.dev_loss = dev_loss(params, dev_corpus, train_cfg.batch_size);
    rec.dev_perplexity = std::exp(rec.dev_loss);
    double score = rec.dev_loss;
    if (train_cfg.selection == SelectionMetric::dev_bleu) {
      rec.dev_bleu = greedy_bleu(params, dev_corpus, *tgt_vocab);
      score = -*rec.dev_bleu;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (score < best_score) {
      best_score = score;
      since_best = 0;
      result.best = params;
      result.report.selected_epoch = epoch;
    } else if (++since_best >= train_cfg.patience) {
      break;
    }
  }
  for (Parameter* p : result.best.parameters()) p->zero_grad();
  return result;
}

}  // namespace mmt
