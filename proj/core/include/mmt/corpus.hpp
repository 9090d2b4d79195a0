#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmt/image_features.hpp"
#include "mmt/tensor.hpp"
#include "mmt/vocab.hpp"

namespace mmt {

struct CaptionTriple {
  std::vector<int> source;
  std::vector<int> target;
  std::vector<float> image;  ///< empty when the corpus carries no features
};

struct Corpus {
  std::vector<CaptionTriple> triples;
  std::size_t image_dim = 0;  ///< 0 when there are no image features

  bool has_images() const noexcept { return image_dim > 0; }
  std::size_t size() const noexcept { return triples.size(); }
  std::size_t target_tokens() const;
};

/// Reads a UTF-8 text file, one sentence per line, and runs preprocess_line on
/// every line.
std::vector<std::vector<std::string>> read_tokenized(const std::filesystem::path& path);

/// Encodes aligned source/target token lists (and optional features) into a corpus.
/// Throws Error(Errc::misaligned) when the three inputs disagree on line count.
Corpus make_corpus(const std::vector<std::vector<std::string>>& source,
                   const std::vector<std::vector<std::string>>& target, const Vocabulary& src_vocab,
                   const Vocabulary& tgt_vocab, const ImageFeatureStore* images = nullptr);

/// Padded, teacher-forcing ready minibatch. Matrices are row-major with one
/// row per sentence.
struct Batch {
  std::size_t size = 0;
  std::size_t src_len = 0;       ///< longest source in the batch
  std::size_t tgt_len = 0;       ///< longest target + 1 (BOS / EOS slot)
  std::vector<int> source;       ///< size x src_len, PAD-filled
  std::vector<std::size_t> source_lengths;
  std::vector<int> target_in;    ///< size x tgt_len, BOS then target, PAD-filled
  std::vector<int> target_out;   ///< size x tgt_len, target then EOS, PAD-filled
  std::vector<double> target_mask;  ///< 1 on real target_out tokens, 0 on PAD
  std::optional<Tensor> images;  ///< size x image_dim

  double token_count() const;
};

/// Assembles one batch from the given triples, in order.
Batch make_batch(const Corpus& corpus, std::span<const std::size_t> members);

/// One epoch worth of batches. Triples are grouped into source-length buckets
/// of width 4, shuffled inside each bucket, the bucket order is shuffled, and
/// the concatenation is cut into batches of `batch_size` (the last may be short).
std::vector<Batch> make_batches(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed);

/// Same as make_batches but returns the triple indices of each batch.
std::vector<std::vector<std::size_t>> plan_batches(const Corpus& corpus, std::size_t batch_size,
                                                   std::uint64_t seed);

}  // namespace mmt
