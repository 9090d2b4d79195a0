#include <CLI11.hpp>

#include <functional>
#include <ostream>

#include "mmt/cli/commands.hpp"
#include "mmt/error.hpp"

namespace mmt::cli {

namespace {

/// Flags that mirror RunConfig fields. Values given on the command line
/// override the --config file, which overrides the defaults.
class RunOptions {
 public:
  explicit RunOptions(CLI::App* app) : app_(app) {
    app->add_option("--config", config_path_, "flat JSON run config")->check(CLI::ExistingFile);
    bind("--train-src", [](RunConfig& c) -> auto& { return c.train.src; }, "training source text");
    bind("--train-tgt", [](RunConfig& c) -> auto& { return c.train.tgt; }, "training target text");
    bind("--train-img", [](RunConfig& c) -> auto& { return c.train.img; }, "training IMGF features");
    bind("--dev-src", [](RunConfig& c) -> auto& { return c.dev.src; }, "dev source text");
    bind("--dev-tgt", [](RunConfig& c) -> auto& { return c.dev.tgt; }, "dev target text");
    bind("--dev-img", [](RunConfig& c) -> auto& { return c.dev.img; }, "dev IMGF features");
    bind("--test-src", [](RunConfig& c) -> auto& { return c.test.src; }, "test source text");
    bind("--test-tgt", [](RunConfig& c) -> auto& { return c.test.tgt; }, "test target text");
    bind("--test-img", [](RunConfig& c) -> auto& { return c.test.img; }, "test IMGF features");
    bind("--embed-dim", [](RunConfig& c) -> auto& { return c.model.embed_dim; }, "embedding size");
    bind("--hidden-dim", [](RunConfig& c) -> auto& { return c.model.hidden_dim; }, "LSTM state size");
    bind("--layers", [](RunConfig& c) -> auto& { return c.model.layers; }, "encoder and decoder depth");
    bind("--lr", [](RunConfig& c) -> auto& { return c.training.learning_rate; }, "SGD learning rate");
    bind("--batch-size", [](RunConfig& c) -> auto& { return c.training.batch_size; }, "sentences per batch");
    bind("--dropout", [](RunConfig& c) -> auto& { return c.training.dropout_rate; }, "dropout rate");
    bind("--epochs", [](RunConfig& c) -> auto& { return c.training.max_epochs; }, "maximum epochs");
    bind("--seed", [](RunConfig& c) -> auto& { return c.training.seed; }, "initialization and shuffling seed");
    bind("--patience", [](RunConfig& c) -> auto& { return c.training.patience; }, "early-stopping patience");
    bind("--beam", [](RunConfig& c) -> auto& { return c.beam.beam_size; }, "beam size");
    bind("--reward", [](RunConfig& c) -> auto& { return c.beam.reward; }, "per-token length reward");
    bind("--length-bound-ratio", [](RunConfig& c) -> auto& { return c.beam.length_bound_ratio; },
         "reward bound as a multiple of the source length");
    bind("--max-len", [](RunConfig& c) -> auto& { return c.beam.max_len_cap; }, "hard output length cap");
    bind("--beams", [](RunConfig& c) -> auto& { return c.sweep_beams; }, "sweep beam sizes")->delimiter(',');
    bind("--rewards", [](RunConfig& c) -> auto& { return c.sweep_rewards; }, "sweep rewards")->delimiter(',');
    bind("--out-dir", [](RunConfig& c) -> auto& { return c.output_dir; }, "run directory");
    variant_ = app->add_option("--variant", variant_text_, "osu1 (image-initialized) or osu2 (text only)")
                   ->check(CLI::IsMember({"osu1", "osu2"}));
    selection_ = app->add_option("--selection", selection_text_, "model selection metric")
                     ->check(CLI::IsMember({"dev_loss", "dev_bleu"}));
    clip_ = app->add_option("--clip-norm", clip_value_, "global gradient-norm clip; <= 0 disables");
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path_.empty() ? RunConfig{} : load_run_config(config_path_);
    for (const auto& [option, copy] : bound_) {
      if (option->count() > 0) copy(cfg, values_);
    }
    if (variant_->count() > 0) cfg.model.variant = parse_variant(variant_text_);
    if (selection_->count() > 0) {
      cfg.training.selection = selection_text_ == "dev_bleu" ? SelectionMetric::dev_bleu : SelectionMetric::dev_loss;
    }
    if (clip_->count() > 0) cfg.training.clip_norm = clip_value_ > 0.0 ? std::optional<double>(clip_value_) : std::nullopt;
    cfg.model.dropout_rate = cfg.training.dropout_rate;
    return cfg;
  }

 private:
  template <class Field>
  CLI::Option* bind(const std::string& flag, Field field, const std::string& help) {
    CLI::Option* option = app_->add_option(flag, field(values_), help);
    bound_.emplace_back(option, [field](RunConfig& dst, const RunConfig& src) {
      field(dst) = field(const_cast<RunConfig&>(src));
    });
    return option;
  }

  CLI::App* app_;
  RunConfig values_;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&, const RunConfig&)>>> bound_;
  std::string config_path_;
  std::string variant_text_, selection_text_;
  double clip_value_ = 0.0;
  CLI::Option* variant_ = nullptr;
  CLI::Option* selection_ = nullptr;
  CLI::Option* clip_ = nullptr;
};

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal neural machine translation toolkit", kToolName};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CLI::App* synth = app.add_subcommand("synth", "write the synthetic grounding corpus");
  SynthConfig synth_cfg;
  std::string synth_dir;
  synth->add_option("--out-dir", synth_dir, "destination directory")->required();
  synth->add_option("--seed", synth_cfg.seed, "generator seed");
  synth->add_option("--train-size", synth_cfg.train_size, "training pairs");
  synth->add_option("--dev-size", synth_cfg.dev_size, "dev pairs");
  synth->add_option("--test-size", synth_cfg.test_size, "test pairs");
  synth->add_option("--image-dim", synth_cfg.image_dim, "image feature dimension");

  CLI::App* preprocess = app.add_subcommand("preprocess", "tokenize a parallel corpus and build vocabularies");
  PreprocessRequest prep;
  std::string prep_dir;
  preprocess->add_option("--train-src", prep.train.src, "raw training source")->required();
  preprocess->add_option("--train-tgt", prep.train.tgt, "raw training target")->required();
  preprocess->add_option("--train-img", prep.train.img, "training IMGF features (count check only)");
  preprocess->add_option("--dev-src", prep.dev.src, "raw dev source");
  preprocess->add_option("--dev-tgt", prep.dev.tgt, "raw dev target");
  preprocess->add_option("--dev-img", prep.dev.img, "dev IMGF features (count check only)");
  preprocess->add_option("--test-src", prep.test.src, "raw test source");
  preprocess->add_option("--test-tgt", prep.test.tgt, "raw test target");
  preprocess->add_option("--test-img", prep.test.img, "test IMGF features (count check only)");
  preprocess->add_option("--out-dir", prep_dir, "destination directory")->required();

  CLI::App* train = app.add_subcommand("train", "train a model into --out-dir");
  const RunOptions train_opts(train);
  bool quiet = false;
  train->add_flag("--quiet", quiet, "no per-epoch progress");

  CLI::App* translate = app.add_subcommand("translate", "beam-decode the test source with a trained run");
  const RunOptions translate_opts(translate);
  std::string translations;
  translate->add_option("--translations", translations, "output file (default: <out-dir>/translations.txt)");

  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "score hypotheses against references");
  std::string hyp, ref, eval_out;
  evaluate_cmd->add_option("--hyp", hyp, "hypothesis file")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--ref", ref, "reference file")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--out", eval_out, "also write the JSON report here");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "decode the dev set over a beam x reward grid");
  const RunOptions sweep_opts(sweep_cmd);

  std::vector<const char*> argv = {kToolName};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      cmd_synth(synth_cfg, synth_dir);
      out << "wrote synthetic corpus to " << synth_dir << '\n';
    } else if (*preprocess) {
      prep.out_dir = prep_dir;
      out << cmd_preprocess(prep).dump(2) << '\n';
    } else if (*train) {
      const RunConfig cfg = train_opts.resolve();
      const TrainReport report = cmd_train(cfg, quiet ? nullptr : &err);
      const auto& best = report.epochs.at(report.selected_epoch - 1);
      out << "selected epoch " << best.epoch << " (dev loss " << best.dev_loss << "), model in " << cfg.output_dir
          << '\n';
    } else if (*translate) {
      const RunConfig cfg = translate_opts.resolve();
      std::optional<std::filesystem::path> target;
      if (!translations.empty()) target = translations;
      const auto hyps = cmd_translate(cfg, target);
      out << "translated " << hyps.size() << " sentences\n";
    } else if (*evaluate_cmd) {
      std::optional<std::filesystem::path> target;
      if (!eval_out.empty()) target = eval_out;
      out << to_json(cmd_evaluate(hyp, ref, target)).dump() << '\n';
    } else if (*sweep_cmd) {
      const RunConfig cfg = sweep_opts.resolve();
      const auto records = cmd_sweep(cfg);
      out << "beam,reward,bleu,length_ratio\n";
      for (const auto& r : records) out << r.beam << ',' << r.reward << ',' << r.bleu << ',' << r.length_ratio << '\n';
    }
  } catch (const Error& e) {
    err << kToolName << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << kToolName << ": invalid_config: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << kToolName << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace mmt::cli
