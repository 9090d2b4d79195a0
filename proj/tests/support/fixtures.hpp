#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <numeric>
#include <vector>

#include "mmt/corpus.hpp"
#include "mmt/model.hpp"
#include "mmt/rng.hpp"
#include "mmt/vocab.hpp"

namespace mmt::testing {

inline ModelConfig tiny_config(Variant variant, std::size_t vocab = 12, std::size_t image_dim = 6) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 8;
  cfg.layers = 2;
  cfg.image_dim = image_dim;
  cfg.dropout_rate = 0.0;
  cfg.src_vocab_size = vocab;
  cfg.tgt_vocab_size = vocab;
  return cfg;
}

/// Random corpus with word ids in [kFirstWordId, vocab), lengths in [1, max_len],
/// and Gaussian image features.
inline Corpus random_corpus(std::uint64_t seed, std::size_t n, std::size_t vocab, std::size_t max_len,
                            std::size_t image_dim) {
  Rng rng(seed, "fixture");
  Corpus corpus;
  corpus.image_dim = image_dim;
  auto sentence = [&] {
    std::vector<int> ids(1 + rng.below(max_len));
    for (int& id : ids) id = kFirstWordId + static_cast<int>(rng.below(vocab - kFirstWordId));
    return ids;
  };
  for (std::size_t i = 0; i < n; ++i) {
    CaptionTriple t;
    t.source = sentence();
    t.target = sentence();
    for (std::size_t k = 0; k < image_dim; ++k) t.image.push_back(static_cast<float>(rng.normal()));
    corpus.triples.push_back(std::move(t));
  }
  return corpus;
}

inline std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "mmt_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace mmt::testing
