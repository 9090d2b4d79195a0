#include "mmt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>

#include "mmt/error.hpp"
#include "mmt/rng.hpp"
#include "mmt/text.hpp"

namespace mmt {

namespace {
constexpr std::size_t kBucketWidth = 4;
}

std::size_t Corpus::target_tokens() const {
  std::size_t n = 0;
  for (const auto& t : triples) n += t.target.size();
  return n;
}

std::vector<std::vector<std::string>> read_tokenized(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  std::vector<std::vector<std::string>> lines;
  std::string line;
  while (std::getline(in, line)) {
    try {
      lines.push_back(preprocess_line(line));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lines.size() + 1) + ": " + e.what());
    }
  }
  return lines;
}

Corpus make_corpus(const std::vector<std::vector<std::string>>& source,
                   const std::vector<std::vector<std::string>>& target, const Vocabulary& src_vocab,
                   const Vocabulary& tgt_vocab, const ImageFeatureStore* images) {
  if (source.size() != target.size()) {
    throw Error(Errc::misaligned, "source has " + std::to_string(source.size()) + " lines, target has " +
                                      std::to_string(target.size()));
  }
  if (images != nullptr && images->count() != source.size()) {
    throw Error(Errc::misaligned, "text has " + std::to_string(source.size()) + " lines, image features have " +
                                      std::to_string(images->count()) + " rows");
  }
  Corpus corpus;
  corpus.image_dim = images ? images->dim() : 0;
  corpus.triples.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i].empty() || target[i].empty()) {
      throw Error(Errc::empty_segment, "empty sentence on line " + std::to_string(i + 1));
    }
    CaptionTriple t{src_vocab.encode(source[i]), tgt_vocab.encode(target[i]), {}};
    if (images) {
      auto row = images->row(i);
      t.image.assign(row.begin(), row.end());
    }
    corpus.triples.push_back(std::move(t));
  }
  return corpus;
}

double Batch::token_count() const { return std::accumulate(target_mask.begin(), target_mask.end(), 0.0); }

Batch make_batch(const Corpus& corpus, std::span<const std::size_t> members) {
  Batch b;
  b.size = members.size();
  for (std::size_t m : members) {
    const auto& t = corpus.triples.at(m);
    b.src_len = std::max(b.src_len, t.source.size());
    b.tgt_len = std::max(b.tgt_len, t.target.size() + 1);
  }
  b.source.assign(b.size * b.src_len, kPadId);
  b.target_in.assign(b.size * b.tgt_len, kPadId);
  b.target_out.assign(b.size * b.tgt_len, kPadId);
  b.target_mask.assign(b.size * b.tgt_len, 0.0);
  if (corpus.has_images()) b.images = Tensor({b.size, corpus.image_dim});
  for (std::size_t r = 0; r < b.size; ++r) {
    const auto& t = corpus.triples[members[r]];
    std::copy(t.source.begin(), t.source.end(), b.source.begin() + static_cast<std::ptrdiff_t>(r * b.src_len));
    b.source_lengths.push_back(t.source.size());
    const std::size_t row = r * b.tgt_len;
    b.target_in[row] = kBosId;
    for (std::size_t k = 0; k < t.target.size(); ++k) {
      b.target_in[row + k + 1] = t.target[k];
      b.target_out[row + k] = t.target[k];
      b.target_mask[row + k] = 1.0;
    }
    b.target_out[row + t.target.size()] = kEosId;
    b.target_mask[row + t.target.size()] = 1.0;
    if (b.images) {
      if (t.image.size() != corpus.image_dim) {
        throw Error(Errc::missing_image, "triple " + std::to_string(members[r]) + " lacks an image feature");
      }
      for (std::size_t k = 0; k < corpus.image_dim; ++k) b.images->at(r, k) = t.image[k];
    }
  }
  return b;
}

std::vector<std::vector<std::size_t>> plan_batches(const Corpus& corpus, std::size_t batch_size,
                                                   std::uint64_t seed) {
  if (batch_size == 0) throw Error(Errc::invalid_argument, "batch size must be at least 1");
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::size_t len = std::max<std::size_t>(corpus.triples[i].source.size(), 1);
    buckets[(len - 1) / kBucketWidth].push_back(i);
  }
  Rng rng(seed, "shuffle");
  std::vector<std::vector<std::size_t>> order;
  for (auto& [key, members] : buckets) {
    rng.shuffle(members);
    order.push_back(std::move(members));
  }
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> plan;
  std::vector<std::size_t> current;
  for (const auto& bucket : order) {
    for (std::size_t i : bucket) {
      current.push_back(i);
      if (current.size() == batch_size) plan.push_back(std::exchange(current, {}));
    }
  }
  if (!current.empty()) plan.push_back(std::move(current));
  return plan;
}

std::vector<Batch> make_batches(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed) {
  std::vector<Batch> batches;
  for (const auto& members : plan_batches(corpus, batch_size, seed)) batches.push_back(make_batch(corpus, members));
  return batches;
}

}  // namespace mmt
