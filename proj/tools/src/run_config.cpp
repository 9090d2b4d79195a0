#include "mmt/cli/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mmt/error.hpp"

namespace mmt::cli {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::invalid_config, what);
}

void require_file(const std::string& path, const std::string& key) {
  require(!path.empty(), key + " is required for this command");
  std::error_code ec;
  require(std::filesystem::is_regular_file(path, ec), key + " '" + path + "' does not exist");
}

std::string_view to_string(SelectionMetric m) { return m == SelectionMetric::dev_loss ? "dev_loss" : "dev_bleu"; }

SelectionMetric parse_selection(const std::string& text) {
  if (text == "dev_loss") return SelectionMetric::dev_loss;
  if (text == "dev_bleu") return SelectionMetric::dev_bleu;
  throw Error(Errc::invalid_config, "selection must be dev_loss or dev_bleu, got '" + text + "'");
}

using Setter = std::function<void(RunConfig&, const json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"train_src", [](RunConfig& c, const json& v) { c.train.src = v.get<std::string>(); }},
      {"train_tgt", [](RunConfig& c, const json& v) { c.train.tgt = v.get<std::string>(); }},
      {"train_img", [](RunConfig& c, const json& v) { c.train.img = v.get<std::string>(); }},
      {"dev_src", [](RunConfig& c, const json& v) { c.dev.src = v.get<std::string>(); }},
      {"dev_tgt", [](RunConfig& c, const json& v) { c.dev.tgt = v.get<std::string>(); }},
      {"dev_img", [](RunConfig& c, const json& v) { c.dev.img = v.get<std::string>(); }},
      {"test_src", [](RunConfig& c, const json& v) { c.test.src = v.get<std::string>(); }},
      {"test_tgt", [](RunConfig& c, const json& v) { c.test.tgt = v.get<std::string>(); }},
      {"test_img", [](RunConfig& c, const json& v) { c.test.img = v.get<std::string>(); }},
      {"variant", [](RunConfig& c, const json& v) { c.model.variant = parse_variant(v.get<std::string>()); }},
      {"embed_dim", [](RunConfig& c, const json& v) { c.model.embed_dim = v.get<std::size_t>(); }},
      {"hidden_dim", [](RunConfig& c, const json& v) { c.model.hidden_dim = v.get<std::size_t>(); }},
      {"layers", [](RunConfig& c, const json& v) { c.model.layers = v.get<std::size_t>(); }},
      {"learning_rate", [](RunConfig& c, const json& v) { c.training.learning_rate = v.get<double>(); }},
      {"batch_size", [](RunConfig& c, const json& v) { c.training.batch_size = v.get<std::size_t>(); }},
      {"dropout_rate", [](RunConfig& c, const json& v) { c.training.dropout_rate = v.get<double>(); }},
      {"max_epochs", [](RunConfig& c, const json& v) { c.training.max_epochs = v.get<std::size_t>(); }},
      {"clip_norm",
       [](RunConfig& c, const json& v) {
         c.training.clip_norm = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
       }},
      {"seed", [](RunConfig& c, const json& v) { c.training.seed = v.get<std::uint64_t>(); }},
      {"patience", [](RunConfig& c, const json& v) { c.training.patience = v.get<std::size_t>(); }},
      {"selection", [](RunConfig& c, const json& v) { c.training.selection = parse_selection(v.get<std::string>()); }},
      {"beam_size", [](RunConfig& c, const json& v) { c.beam.beam_size = v.get<std::size_t>(); }},
      {"reward", [](RunConfig& c, const json& v) { c.beam.reward = v.get<double>(); }},
      {"length_bound_ratio", [](RunConfig& c, const json& v) { c.beam.length_bound_ratio = v.get<double>(); }},
      {"max_len_cap", [](RunConfig& c, const json& v) { c.beam.max_len_cap = v.get<std::size_t>(); }},
      {"sweep_beams", [](RunConfig& c, const json& v) { c.sweep_beams = v.get<std::vector<std::size_t>>(); }},
      {"sweep_rewards", [](RunConfig& c, const json& v) { c.sweep_rewards = v.get<std::vector<double>>(); }},
      {"output_dir", [](RunConfig& c, const json& v) { c.output_dir = v.get<std::string>(); }},
  };
  return table;
}

}  // namespace

void validate(const RunConfig& cfg, Stage stage) {
  require(!cfg.output_dir.empty(), "output_dir must be set");
  require(cfg.model.embed_dim > 0 && cfg.model.hidden_dim > 0 && cfg.model.layers > 0,
          "embed_dim, hidden_dim and layers must be positive");
  cfg.training.validate();
  cfg.beam.validate();
  switch (stage) {
    case Stage::train:
      require_file(cfg.train.src, "train_src");
      require_file(cfg.train.tgt, "train_tgt");
      require_file(cfg.dev.src, "dev_src");
      require_file(cfg.dev.tgt, "dev_tgt");
      if (cfg.model.uses_image()) {
        require_file(cfg.train.img, "train_img (osu1 needs image features)");
        require_file(cfg.dev.img, "dev_img (osu1 needs image features)");
      }
      break;
    case Stage::translate:
      require_file(cfg.test.src, "test_src");
      break;
    case Stage::sweep:
      require(!cfg.sweep_beams.empty() && !cfg.sweep_rewards.empty(), "sweep grid must not be empty");
      for (std::size_t b : cfg.sweep_beams) require(b >= 1, "sweep beam sizes must be at least 1");
      for (double r : cfg.sweep_rewards) require(r >= 0.0, "sweep rewards must be >= 0");
      require_file(cfg.dev.src, "dev_src");
      require_file(cfg.dev.tgt, "dev_tgt");
      break;
  }
}

ordered_json to_json(const RunConfig& cfg) {
  ordered_json j;
  j["train_src"] = cfg.train.src;
  j["train_tgt"] = cfg.train.tgt;
  j["train_img"] = cfg.train.img;
  j["dev_src"] = cfg.dev.src;
  j["dev_tgt"] = cfg.dev.tgt;
  j["dev_img"] = cfg.dev.img;
  j["test_src"] = cfg.test.src;
  j["test_tgt"] = cfg.test.tgt;
  j["test_img"] = cfg.test.img;
  j["variant"] = std::string(mmt::to_string(cfg.model.variant));
  j["embed_dim"] = cfg.model.embed_dim;
  j["hidden_dim"] = cfg.model.hidden_dim;
  j["layers"] = cfg.model.layers;
  j["learning_rate"] = cfg.training.learning_rate;
  j["batch_size"] = cfg.training.batch_size;
  j["dropout_rate"] = cfg.training.dropout_rate;
  j["max_epochs"] = cfg.training.max_epochs;
  j["clip_norm"] = cfg.training.clip_norm ? ordered_json(*cfg.training.clip_norm) : ordered_json(nullptr);
  j["seed"] = cfg.training.seed;
  j["patience"] = cfg.training.patience;
  j["selection"] = std::string(to_string(cfg.training.selection));
  j["beam_size"] = cfg.beam.beam_size;
  j["reward"] = cfg.beam.reward;
  j["length_bound_ratio"] = cfg.beam.length_bound_ratio;
  j["max_len_cap"] = cfg.beam.max_len_cap;
  j["sweep_beams"] = cfg.sweep_beams;
  j["sweep_rewards"] = cfg.sweep_rewards;
  j["output_dir"] = cfg.output_dir;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  require(j.is_object(), "run config must be a JSON object");
  RunConfig cfg;
  // The model's dropout follows the training config; keep them in step.
  cfg.model.dropout_rate = cfg.training.dropout_rate;
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    const auto it = table.find(key);
    require(it != table.end(), "unknown config key '" + key + "'");
    try {
      it->second(cfg, value);
    } catch (const json::exception& e) {
      throw Error(Errc::invalid_config, "config key '" + key + "': " + e.what());
    }
  }
  cfg.model.dropout_rate = cfg.training.dropout_rate;
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) { return run_config_from_json(read_json_file(path)); }

void save_run_config(const std::filesystem::path& path, const RunConfig& cfg) { write_json_file(path, to_json(cfg)); }

ordered_json to_json(const SynthConfig& cfg) {
  ordered_json j;
  j["train_size"] = cfg.train_size;
  j["dev_size"] = cfg.dev_size;
  j["test_size"] = cfg.test_size;
  j["image_dim"] = cfg.image_dim;
  j["min_len"] = cfg.min_len;
  j["max_len"] = cfg.max_len;
  j["cluster_offset"] = cfg.cluster_offset;
  j["cluster_stddev"] = cfg.cluster_stddev;
  j["seed"] = cfg.seed;
  return j;
}

SynthConfig synth_config_from_json(const json& j) {
  require(j.is_object(), "synth config must be a JSON object");
  SynthConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "train_size") cfg.train_size = value.get<std::size_t>();
      else if (key == "dev_size") cfg.dev_size = value.get<std::size_t>();
      else if (key == "test_size") cfg.test_size = value.get<std::size_t>();
      else if (key == "image_dim") cfg.image_dim = value.get<std::size_t>();
      else if (key == "min_len") cfg.min_len = value.get<std::size_t>();
      else if (key == "max_len") cfg.max_len = value.get<std::size_t>();
      else if (key == "cluster_offset") cfg.cluster_offset = value.get<double>();
      else if (key == "cluster_stddev") cfg.cluster_stddev = value.get<double>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else throw Error(Errc::invalid_config, "unknown synth config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, std::string("synth config: ") + e.what());
  }
  return cfg;
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const RunConfig& cfg) {
  ordered_json j = to_json(cfg);
  j.erase("output_dir");
  return fnv1a_hex(j.dump());
}

ordered_json to_json(const Manifest& m) {
  ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = m.command;
  j["seed"] = m.seed;
  j["config_hash"] = m.config_hash;
  j["config"] = m.config;
  j["outputs"] = m.outputs;
  return j;
}

Manifest manifest_from_json(const json& j) {
  try {
    Manifest m;
    m.command = j.at("command").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.config = j.at("config");
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, std::string("malformed manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) { write_json_file(path, to_json(m)); }

Manifest read_manifest(const std::filesystem::path& path) { return manifest_from_json(read_json_file(path)); }

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw Error(Errc::invalid_config, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(Errc::io_failure, "failed writing " + path.string());
}

}  // namespace mmt::cli
