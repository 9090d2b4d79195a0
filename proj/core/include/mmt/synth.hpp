#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmt/image_features.hpp"
#include "mmt/metrics.hpp"

namespace mmt {

/// Toy caption-translation task whose one ambiguous source word ("bat") has two
/// possible translations, chosen solely by which of two Gaussian clusters the
/// paired image feature was drawn from. Every other word translates one-to-one.
struct SynthConfig {
  std::size_t train_size = 500;
  std::size_t dev_size = 100;
  std::size_t test_size = 100;
  std::size_t image_dim = 16;
  std::size_t min_len = 3;
  std::size_t max_len = 6;
  double cluster_offset = 1.0;  ///< per-coordinate distance of a cluster mean from the origin
  double cluster_stddev = 0.5;
  std::uint64_t seed = 7;
};

struct SynthSplit {
  std::vector<std::string> source;  ///< one sentence per line
  std::vector<std::string> target;
  ImageFeatureStore images;
  std::vector<int> cluster;         ///< 0 or 1 per line
};

struct SynthData {
  SynthSplit train, dev, test;
};

inline constexpr const char* kAmbiguousSource = "bat";
inline constexpr const char* kSenseA = "fledermaus";
inline constexpr const char* kSenseB = "schlaeger";

SynthData generate_synthetic(const SynthConfig& cfg);

/// Writes {train,dev,test}.{src,tgt,imgf} under `dir`.
void write_synthetic(const std::filesystem::path& dir, const SynthData& data);

/// Fraction of sentences whose hypothesis contains the reference's sense of
/// the ambiguous word and not the other sense. Sentences whose reference holds
/// neither sense are skipped.
double disambiguation_accuracy(std::span<const Sentence> hypotheses, std::span<const Sentence> references);

}  // namespace mmt
