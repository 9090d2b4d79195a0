#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmt/beam.hpp"
#include "mmt/model.hpp"
#include "mmt/synth.hpp"
#include "mmt/train.hpp"

namespace mmt::cli {

inline constexpr const char* kToolName = "mmt";
inline constexpr const char* kToolVersion = "0.1.0";

/// Parallel text plus optional IMGF features for one split. Empty means unset.
struct SplitPaths {
  std::string src;
  std::string tgt;
  std::string img;

  friend bool operator==(const SplitPaths&, const SplitPaths&) = default;
};

/// Everything a train / translate / sweep run depends on. Serialized as flat
/// JSON with every default written out. Vocabulary sizes and image_dim are
/// taken from the data, not from here.
struct RunConfig {
  SplitPaths train, dev, test;
  ModelConfig model;
  TrainConfig training;
  BeamConfig beam;
  std::vector<std::size_t> sweep_beams = {1, 2, 5, 10};
  std::vector<double> sweep_rewards = {0.0, 0.1, 0.3};
  std::string output_dir = "run";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

enum class Stage { train, translate, sweep };

/// Checks value ranges, that every path the stage reads is set and exists,
/// and that osu1 training has image features. Throws Error(Errc::invalid_config).
/// Decoding stages check images against the loaded checkpoint instead.
void validate(const RunConfig& cfg, Stage stage);

nlohmann::ordered_json to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys are a config error.
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& cfg);

nlohmann::ordered_json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);

/// 64-bit FNV-1a of `text`, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

/// Hash of the canonical JSON of a run config, ignoring output_dir (where the
/// artifacts go does not change what they contain).
std::string config_hash(const RunConfig& cfg);

/// Self-describing record written next to every command's outputs.
struct Manifest {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::ordered_json config;
  std::vector<std::string> outputs;
};

nlohmann::ordered_json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

/// Reads a whole JSON document, mapping I/O and parse failures to structured errors.
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes `j` pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j);

}  // namespace mmt::cli
