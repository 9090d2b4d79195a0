#include "mmt/synth.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include "mmt/error.hpp"
#include "mmt/rng.hpp"

namespace mmt {

namespace {

struct WordPair {
  const char* source;
  const char* target;
};

constexpr std::array<WordPair, 12> kLexicon = {{
    {"a", "ein"},       {"man", "mann"},   {"woman", "frau"}, {"dog", "hund"},
    {"cat", "katze"},   {"runs", "rennt"}, {"sits", "sitzt"}, {"near", "nahe"},
    {"the", "der"},     {"red", "rot"},    {"blue", "blau"},  {"big", "gross"},
}};

SynthSplit make_split(std::size_t count, const SynthConfig& cfg, const std::vector<double>& direction, Rng& rng) {
  SynthSplit split;
  std::vector<int> clusters(count);
  for (std::size_t i = 0; i < count; ++i) clusters[i] = static_cast<int>(i % 2);
  rng.shuffle(clusters);

  std::vector<float> features;
  features.reserve(count * cfg.image_dim);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t len = cfg.min_len + rng.below(cfg.max_len - cfg.min_len + 1);
    const std::size_t slot = rng.below(len);
    std::string src, tgt;
    for (std::size_t k = 0; k < len; ++k) {
      if (k) {
        src += ' ';
        tgt += ' ';
      }
      if (k == slot) {
        src += kAmbiguousSource;
        tgt += clusters[i] == 0 ? kSenseA : kSenseB;
      } else {
        const auto& w = kLexicon[rng.below(kLexicon.size())];
        src += w.source;
        tgt += w.target;
      }
    }
    split.source.push_back(std::move(src));
    split.target.push_back(std::move(tgt));
    const double sign = clusters[i] == 0 ? 1.0 : -1.0;
    for (std::size_t d = 0; d < cfg.image_dim; ++d) {
      features.push_back(static_cast<float>(sign * cfg.cluster_offset * direction[d] + cfg.cluster_stddev * rng.normal()));
    }
  }
  split.images = ImageFeatureStore(count, cfg.image_dim, std::move(features));
  split.cluster = std::move(clusters);
  return split;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace

SynthData generate_synthetic(const SynthConfig& cfg) {
  if (cfg.image_dim == 0 || cfg.min_len < 1 || cfg.max_len < cfg.min_len) {
    throw Error(Errc::invalid_config, "synthetic task needs image_dim > 0 and 1 <= min_len <= max_len");
  }
  if (cfg.train_size == 0 || cfg.dev_size == 0 || cfg.test_size == 0) {
    throw Error(Errc::invalid_config, "synthetic splits must be non-empty");
  }
  Rng rng(cfg.seed, "synth");
  std::vector<double> direction(cfg.image_dim);
  for (double& d : direction) d = rng.uniform() < 0.5 ? -1.0 : 1.0;
  SynthData data;
  data.train = make_split(cfg.train_size, cfg, direction, rng);
  data.dev = make_split(cfg.dev_size, cfg, direction, rng);
  data.test = make_split(cfg.test_size, cfg, direction, rng);
  return data;
}

void write_synthetic(const std::filesystem::path& dir, const SynthData& data) {
  std::filesystem::create_directories(dir);
  const std::array<std::pair<const char*, const SynthSplit*>, 3> splits = {
      {{"train", &data.train}, {"dev", &data.dev}, {"test", &data.test}}};
  for (const auto& [name, split] : splits) {
    write_lines(dir / (std::string(name) + ".src"), split->source);
    write_lines(dir / (std::string(name) + ".tgt"), split->target);
    save_image_features(dir / (std::string(name) + ".imgf"), split->images);
  }
}

double disambiguation_accuracy(std::span<const Sentence> hypotheses, std::span<const Sentence> references) {
  if (hypotheses.size() != references.size()) {
    throw Error(Errc::misaligned, "disambiguation accuracy needs aligned hypotheses and references");
  }
  auto has = [](const Sentence& s, const char* word) { return std::find(s.begin(), s.end(), word) != s.end(); };
  std::size_t scored = 0, correct = 0;
  for (std::size_t i = 0; i < references.size(); ++i) {
    const bool a = has(references[i], kSenseA), b = has(references[i], kSenseB);
    if (a == b) continue;
    ++scored;
    const char* want = a ? kSenseA : kSenseB;
    const char* other = a ? kSenseB : kSenseA;
    if (has(hypotheses[i], want) && !has(hypotheses[i], other)) ++correct;
  }
  if (scored == 0) throw Error(Errc::empty_input, "no reference contains an ambiguous sense");
  return static_cast<double>(correct) / static_cast<double>(scored);
}

}  // namespace mmt
