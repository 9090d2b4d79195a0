#include "mmt/decode.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "mmt/error.hpp"

namespace mmt {

NmtScorer::NmtScorer(const ModelParams& params, std::span<const int> source, std::span<const float> image)
    : params_(params), tape_(std::make_unique<Tape>(Mode::inference)) {
  if (source.empty()) throw Error(Errc::empty_input, "cannot decode an empty source sentence");
  const std::vector<std::size_t> lengths = {source.size()};
  std::optional<ImageStates> img;
  if (params.config.uses_image()) {
    if (image.size() != params.config.image_dim) {
      throw Error(Errc::missing_image, "osu1 decoding needs an image feature of dimension " +
                                           std::to_string(params.config.image_dim));
    }
    Tensor features({1, image.size()});
    std::copy(image.begin(), image.end(), features.values().begin());
    img = image_to_init_states(*tape_, params, features);
  }
  const ImageStates* img_ptr = img ? &*img : nullptr;
  encoder_ = encode(*tape_, params, source, lengths, img_ptr);
  initial_ = decode_init(*tape_, params, encoder_, img_ptr);
}

std::pair<std::vector<double>, NmtScorer::State> NmtScorer::advance(const State& state, int token) const {
  const std::array<int, 1> ids = {token};
  StepResult step = decode_step(*tape_, params_, embed_target(*tape_, params_, ids), state, encoder_);
  const Tensor& logits = step.logits.value();
  std::vector<double> log_probs(logits.values().begin(), logits.values().end());
  const double mx = *std::max_element(log_probs.begin(), log_probs.end());
  double z = 0.0;
  for (double v : log_probs) z += std::exp(v - mx);
  const double log_z = mx + std::log(z);
  for (double& v : log_probs) v -= log_z;
  return {std::move(log_probs), std::move(step.state)};
}

std::vector<int> greedy_decode(const ModelParams& params, std::span<const int> source, std::span<const float> image,
                               std::size_t max_len_cap) {
  NmtScorer scorer(params, source, image);
  return greedy_decode(scorer, max_len_cap);
}

ScoredOutput beam_search(const ModelParams& params, std::span<const int> source, std::span<const float> image,
                         const BeamConfig& cfg) {
  NmtScorer scorer(params, source, image);
  return beam_search(scorer, source.size(), cfg);
}

std::vector<ScoredOutput> translate_corpus(const ModelParams& params, const Corpus& corpus, const BeamConfig& cfg) {
  cfg.validate();
  std::vector<ScoredOutput> out;
  out.reserve(corpus.size());
  for (const auto& t : corpus.triples) out.push_back(beam_search(params, t.source, t.image, cfg));
  return out;
}

std::vector<Sentence> detokenize(const Vocabulary& vocab, std::span<const ScoredOutput> outputs) {
  std::vector<Sentence> out;
  out.reserve(outputs.size());
  for (const auto& o : outputs) out.push_back(vocab.decode(o.tokens));
  return out;
}

std::vector<SweepRecord> sweep(const ModelParams& params, const Corpus& corpus, const Vocabulary& tgt_vocab,
                               std::span<const Sentence> references, std::span<const std::size_t> beams,
                               std::span<const double> rewards, const BeamConfig& base) {
  if (beams.empty() || rewards.empty()) throw Error(Errc::invalid_config, "sweep grid is empty");
  if (references.size() != corpus.size()) {
    throw Error(Errc::misaligned, "sweep: " + std::to_string(corpus.size()) + " sources vs " +
                                      std::to_string(references.size()) + " references");
  }
  std::vector<SweepRecord> records;
  for (std::size_t b : beams) {
    for (double r : rewards) {
      BeamConfig cfg = base;
      cfg.beam_size = b;
      cfg.reward = r;
      const auto start = std::chrono::steady_clock::now();
      const auto outputs = translate_corpus(params, corpus, cfg);
      const auto hyps = detokenize(tgt_vocab, outputs);
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      records.push_back({b, r, bleu_corpus(hyps, references), length_ratio(hyps, references), elapsed.count()});
    }
  }
  return records;
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRecord> records) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
  out << "beam,reward,bleu,length_ratio,seconds\n";
  out << std::setprecision(12);
  for (const auto& r : records) {
    out << r.beam << ',' << r.reward << ',' << r.bleu << ',' << r.length_ratio << ',' << r.seconds << '\n';
  }
}

}  // namespace mmt
