#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmt/cli/run_config.hpp"
#include "mmt/decode.hpp"
#include "mmt/metrics.hpp"

namespace mmt::cli {

/// File names inside a run directory.
inline constexpr const char* kModelFile = "model.osmt";
inline constexpr const char* kSrcVocabFile = "src.vocab";
inline constexpr const char* kTgtVocabFile = "tgt.vocab";
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kTrainReportFile = "train_report.jsonl";
inline constexpr const char* kTrainTimingFile = "train_timing.json";
inline constexpr const char* kTranslationsFile = "translations.txt";
inline constexpr const char* kSweepFile = "sweep.csv";

/// `manifest.<command>.json`
std::string manifest_name(std::string_view command);

/// Writes the synthetic grounding corpus ({train,dev,test}.{src,tgt,imgf}) and its manifest.
void cmd_synth(const SynthConfig& cfg, const std::filesystem::path& out_dir);

struct PreprocessRequest {
  SplitPaths train, dev, test;  ///< dev and test are optional
  std::filesystem::path out_dir;
};

/// Tokenizes the raw splits into `<split>.src` / `<split>.tgt`, builds the
/// vocabularies from the training split and writes report.json (line counts,
/// vocabulary sizes, dev/test OOV rates). Returns the report.
nlohmann::ordered_json cmd_preprocess(const PreprocessRequest& req);

/// Trains into cfg.output_dir: model, vocabularies, config, report, timing, manifest.
TrainReport cmd_train(const RunConfig& cfg, std::ostream* progress = nullptr);

/// Beam-decodes cfg.test with the model in cfg.output_dir. Writes one
/// space-joined sentence per line to `out` (default: the run directory's
/// translations.txt) and returns the hypotheses.
std::vector<Sentence> cmd_translate(const RunConfig& cfg, const std::optional<std::filesystem::path>& out = {});

/// Scores a hypothesis file against a reference file. Both go through the
/// same preprocessing; blank hypothesis lines are empty translations.
EvalReport cmd_evaluate(const std::filesystem::path& hyp, const std::filesystem::path& ref,
                        const std::optional<std::filesystem::path>& out = {});

nlohmann::ordered_json to_json(const EvalReport& report);

/// Decodes cfg.dev over the sweep grid and writes sweep.csv to the run directory.
std::vector<SweepRecord> cmd_sweep(const RunConfig& cfg);

/// Reads one sentence per line; blank lines become empty sentences.
std::vector<Sentence> read_sentences(const std::filesystem::path& path);

/// Command-line entry point. Returns the process exit code: 0 on success,
/// 1 for configuration errors, 2 for data errors, 3 for numeric errors.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace mmt::cli
