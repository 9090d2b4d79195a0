#include "mmt/cli/commands.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>

#include "mmt/checkpoint.hpp"
#include "mmt/corpus.hpp"
#include "mmt/error.hpp"
#include "mmt/image_features.hpp"
#include "mmt/text.hpp"
#include "mmt/vocab.hpp"

namespace mmt::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_failure, "cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
  return out;
}

void write_lines(const fs::path& path, const std::vector<Sentence>& sentences) {
  std::ofstream out = open_output(path);
  for (const auto& s : sentences) out << join_tokens(s) << '\n';
  if (!out) throw Error(Errc::io_failure, "failed writing " + path.string());
}

std::vector<Sentence> read_split(const std::string& path) { return read_tokenized(path); }

void check_aligned(const std::string& a, std::size_t na, const std::string& b, std::size_t nb) {
  if (na != nb) {
    throw Error(Errc::misaligned, a + " has " + std::to_string(na) + " lines but " + b + " has " +
                                      std::to_string(nb));
  }
}

/// Fraction of `tokens` unknown to `vocab`.
double oov_rate(const std::vector<Sentence>& sentences, const Vocabulary& vocab) {
  std::size_t total = 0, unknown = 0;
  for (const auto& s : sentences) {
    for (const auto& w : s) {
      ++total;
      unknown += !vocab.contains(w);
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(unknown) / static_cast<double>(total);
}

std::size_t token_count(const std::vector<Sentence>& sentences) {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

Manifest run_manifest(std::string command, const RunConfig& cfg, std::vector<std::string> outputs) {
  return {std::move(command), cfg.training.seed, config_hash(cfg), to_json(cfg), std::move(outputs)};
}

struct TrainedRun {
  ModelParams params;
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
};

TrainedRun load_run(const fs::path& dir) {
  return {load_checkpoint(dir / kModelFile), Vocabulary::load(dir / kSrcVocabFile), Vocabulary::load(dir / kTgtVocabFile)};
}

std::optional<ImageFeatureStore> images_for(const ModelParams& params, const std::string& path, const char* key) {
  if (!params.config.uses_image()) return std::nullopt;
  if (path.empty()) throw Error(Errc::missing_image, std::string("osu1 model needs ") + key);
  ImageFeatureStore store = load_image_features(path);
  if (store.dim() != params.config.image_dim) {
    throw Error(Errc::shape_mismatch, path + " holds " + std::to_string(store.dim()) +
                                          "-dimensional features but the model expects " +
                                          std::to_string(params.config.image_dim));
  }
  return store;
}

}  // namespace

std::string manifest_name(std::string_view command) { return "manifest." + std::string(command) + ".json"; }

void cmd_synth(const SynthConfig& cfg, const fs::path& out_dir) {
  const SynthData data = generate_synthetic(cfg);
  ensure_dir(out_dir);
  write_synthetic(out_dir, data);
  const ordered_json config = to_json(cfg);
  std::vector<std::string> outputs;
  for (const char* split : {"train", "dev", "test"}) {
    for (const char* ext : {".src", ".tgt", ".imgf"}) outputs.push_back(std::string(split) + ext);
  }
  write_manifest(out_dir / manifest_name("synth"), {"synth", cfg.seed, fnv1a_hex(config.dump()), config, outputs});
}

ordered_json cmd_preprocess(const PreprocessRequest& req) {
  if (req.train.src.empty() || req.train.tgt.empty()) {
    throw Error(Errc::invalid_config, "preprocess needs a training source and target");
  }
  if (req.out_dir.empty()) throw Error(Errc::invalid_config, "preprocess needs an output directory");

  struct Split {
    const char* name;
    const SplitPaths* paths;
    std::vector<Sentence> src, tgt;
  };
  std::vector<Split> splits;
  for (auto [name, paths] : {std::pair{"train", &req.train}, std::pair{"dev", &req.dev}, std::pair{"test", &req.test}}) {
    if (paths->src.empty() && paths->tgt.empty()) continue;
    if (paths->src.empty() || paths->tgt.empty()) {
      throw Error(Errc::invalid_config, std::string(name) + " split needs both a source and a target file");
    }
    Split s{name, paths, read_split(paths->src), read_split(paths->tgt)};
    check_aligned(paths->src, s.src.size(), paths->tgt, s.tgt.size());
    if (!paths->img.empty()) {
      const ImageFeatureStore images = load_image_features(paths->img);
      check_aligned(paths->src, s.src.size(), paths->img, images.count());
    }
    splits.push_back(std::move(s));
  }

  const Vocabulary src_vocab = Vocabulary::build(splits[0].src);
  const Vocabulary tgt_vocab = Vocabulary::build(splits[0].tgt);
  ensure_dir(req.out_dir);
  src_vocab.save(req.out_dir / kSrcVocabFile);
  tgt_vocab.save(req.out_dir / kTgtVocabFile);

  ordered_json report;
  std::vector<std::string> outputs = {kSrcVocabFile, kTgtVocabFile};
  for (const Split& s : splits) {
    write_lines(req.out_dir / (std::string(s.name) + ".src"), s.src);
    write_lines(req.out_dir / (std::string(s.name) + ".tgt"), s.tgt);
    outputs.push_back(std::string(s.name) + ".src");
    outputs.push_back(std::string(s.name) + ".tgt");
    ordered_json entry;
    entry["line_count"] = s.src.size();
    entry["source_tokens"] = token_count(s.src);
    entry["target_tokens"] = token_count(s.tgt);
    if (std::string_view(s.name) != "train") {
      entry["source_oov_rate"] = oov_rate(s.src, src_vocab);
      entry["target_oov_rate"] = oov_rate(s.tgt, tgt_vocab);
    }
    report[s.name] = entry;
  }
  // Vocabulary sizes exclude the four reserved symbols.
  report["src_vocab_size"] = src_vocab.size() - reserved_symbols().size();
  report["tgt_vocab_size"] = tgt_vocab.size() - reserved_symbols().size();
  write_json_file(req.out_dir / "report.json", report);
  outputs.push_back("report.json");

  ordered_json config;
  config["train_src"] = req.train.src;
  config["train_tgt"] = req.train.tgt;
  config["train_img"] = req.train.img;
  config["dev_src"] = req.dev.src;
  config["dev_tgt"] = req.dev.tgt;
  config["dev_img"] = req.dev.img;
  config["test_src"] = req.test.src;
  config["test_tgt"] = req.test.tgt;
  config["test_img"] = req.test.img;
  write_manifest(req.out_dir / manifest_name("preprocess"), {"preprocess", 0, fnv1a_hex(config.dump()), config, outputs});
  return report;
}

TrainReport cmd_train(const RunConfig& cfg, std::ostream* progress) {
  validate(cfg, Stage::train);
  const auto train_src = read_split(cfg.train.src), train_tgt = read_split(cfg.train.tgt);
  const auto dev_src = read_split(cfg.dev.src), dev_tgt = read_split(cfg.dev.tgt);
  const Vocabulary src_vocab = Vocabulary::build(train_src);
  const Vocabulary tgt_vocab = Vocabulary::build(train_tgt);

  ModelConfig model = cfg.model;
  model.src_vocab_size = src_vocab.size();
  model.tgt_vocab_size = tgt_vocab.size();
  model.dropout_rate = cfg.training.dropout_rate;
  std::optional<ImageFeatureStore> train_img, dev_img;
  if (model.uses_image()) {
    train_img = load_image_features(cfg.train.img);
    dev_img = load_image_features(cfg.dev.img);
    if (train_img->dim() != dev_img->dim()) {
      throw Error(Errc::shape_mismatch, "train and dev image features differ in dimension");
    }
    model.image_dim = train_img->dim();
  }
  const Corpus train_corpus = make_corpus(train_src, train_tgt, src_vocab, tgt_vocab, train_img ? &*train_img : nullptr);
  const Corpus dev_corpus = make_corpus(dev_src, dev_tgt, src_vocab, tgt_vocab, dev_img ? &*dev_img : nullptr);

  EpochCallback on_epoch;
  if (progress) {
    on_epoch = [progress](const EpochRecord& e) {
      *progress << "epoch " << e.epoch << "  train " << std::fixed << std::setprecision(4) << e.train_loss << "  dev "
                << e.dev_loss << "  ppl " << std::setprecision(2) << e.dev_perplexity << "  " << e.seconds << "s"
                << std::defaultfloat << std::endl;
    };
  }
  const TrainResult result = train(model, train_corpus, dev_corpus, cfg.training, &tgt_vocab, on_epoch);

  const fs::path dir = cfg.output_dir;
  ensure_dir(dir);
  save_checkpoint(dir / kModelFile, result.best);
  src_vocab.save(dir / kSrcVocabFile);
  tgt_vocab.save(dir / kTgtVocabFile);
  save_run_config(dir / kConfigFile, cfg);
  {
    std::ofstream out = open_output(dir / kTrainReportFile);
    out << result.report.to_jsonl(false);
  }
  ordered_json timing = ordered_json::array();
  for (const auto& e : result.report.epochs) timing.push_back({{"epoch", e.epoch}, {"seconds", e.seconds}});
  write_json_file(dir / kTrainTimingFile, timing);
  write_manifest(dir / manifest_name("train"),
                 run_manifest("train", cfg,
                              {kModelFile, kSrcVocabFile, kTgtVocabFile, kConfigFile, kTrainReportFile, kTrainTimingFile}));
  return result.report;
}

std::vector<Sentence> cmd_translate(const RunConfig& cfg, const std::optional<fs::path>& out) {
  validate(cfg, Stage::translate);
  const TrainedRun run = load_run(cfg.output_dir);
  const auto source = read_split(cfg.test.src);
  const auto images = images_for(run.params, cfg.test.img, "test_img");
  if (images) check_aligned(cfg.test.src, source.size(), cfg.test.img, images->count());

  Corpus corpus;
  corpus.image_dim = images ? images->dim() : 0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    CaptionTriple t;
    t.source = run.src_vocab.encode(source[i]);
    if (images) t.image.assign(images->row(i).begin(), images->row(i).end());
    corpus.triples.push_back(std::move(t));
  }
  const auto outputs = translate_corpus(run.params, corpus, cfg.beam);
  std::vector<Sentence> hyps = detokenize(run.tgt_vocab, outputs);

  const fs::path target = out ? *out : fs::path(cfg.output_dir) / kTranslationsFile;
  if (target.has_parent_path()) ensure_dir(target.parent_path());
  write_lines(target, hyps);
  const fs::path manifest_dir = target.has_parent_path() ? target.parent_path() : fs::path(".");
  write_manifest(manifest_dir / manifest_name("translate"),
                 run_manifest("translate", cfg, {target.filename().string()}));
  return hyps;
}

std::vector<Sentence> read_sentences(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  std::vector<Sentence> out;
  std::string line;
  while (std::getline(in, line)) {
    const bool blank = line.find_first_not_of(" \t\r\n") == std::string::npos;
    out.push_back(blank ? Sentence{} : preprocess_line(line));
  }
  return out;
}

ordered_json to_json(const EvalReport& report) {
  ordered_json j;
  j["bleu"] = report.bleu;
  j["ter"] = report.ter;
  j["length_ratio"] = report.length_ratio;
  j["n"] = report.sentences;
  return j;
}

EvalReport cmd_evaluate(const fs::path& hyp, const fs::path& ref, const std::optional<fs::path>& out) {
  const auto hyps = read_sentences(hyp);
  const auto refs = read_sentences(ref);
  check_aligned(hyp.string(), hyps.size(), ref.string(), refs.size());
  const EvalReport report = evaluate(hyps, refs);
  if (out) {
    if (out->has_parent_path()) ensure_dir(out->parent_path());
    write_json_file(*out, to_json(report));
    ordered_json config;
    config["hyp"] = hyp.string();
    config["ref"] = ref.string();
    const fs::path dir = out->has_parent_path() ? out->parent_path() : fs::path(".");
    write_manifest(dir / manifest_name("evaluate"),
                   {"evaluate", 0, fnv1a_hex(config.dump()), config, {out->filename().string()}});
  }
  return report;
}

std::vector<SweepRecord> cmd_sweep(const RunConfig& cfg) {
  validate(cfg, Stage::sweep);
  const TrainedRun run = load_run(cfg.output_dir);
  const auto source = read_split(cfg.dev.src), target = read_split(cfg.dev.tgt);
  const auto images = images_for(run.params, cfg.dev.img, "dev_img");
  const Corpus corpus = make_corpus(source, target, run.src_vocab, run.tgt_vocab, images ? &*images : nullptr);
  const auto records = sweep(run.params, corpus, run.tgt_vocab, target, cfg.sweep_beams, cfg.sweep_rewards, cfg.beam);
  const fs::path dir = cfg.output_dir;
  write_sweep_csv(dir / kSweepFile, records);
  write_manifest(dir / manifest_name("sweep"), run_manifest("sweep", cfg, {kSweepFile}));
  return records;
}

}  // namespace mmt::cli
