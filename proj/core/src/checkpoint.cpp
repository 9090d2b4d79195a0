#include "mmt/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "mmt/binary_io.hpp"
#include "mmt/error.hpp"

namespace mmt {

namespace {
constexpr char kMagic[4] = {'O', 'S', 'M', 'T'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t narrow(std::size_t v) { return static_cast<std::uint32_t>(v); }
}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& params) {
  const auto& c = params.config;
  out.write(kMagic, 4);
  io::write_le<std::uint32_t>(out, kVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.variant));
  io::write_le<std::uint32_t>(out, narrow(c.embed_dim));
  io::write_le<std::uint32_t>(out, narrow(c.hidden_dim));
  io::write_le<std::uint32_t>(out, narrow(c.layers));
  io::write_le<std::uint32_t>(out, narrow(c.image_dim));
  io::write_le<std::uint32_t>(out, narrow(c.src_vocab_size));
  io::write_le<std::uint32_t>(out, narrow(c.tgt_vocab_size));
  io::write_le<double>(out, c.dropout_rate);
  const auto list = params.parameters();
  io::write_le<std::uint32_t>(out, narrow(list.size()));
  std::vector<float> buffer;
  for (const Parameter* p : list) {
    io::write_le<std::uint32_t>(out, narrow(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    io::write_le<std::uint32_t>(out, narrow(p->value.rank()));
    for (std::size_t d : p->value.shape()) io::write_le<std::uint32_t>(out, narrow(d));
    buffer.assign(p->value.values().begin(), p->value.values().end());
    out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * sizeof(float)));
  }
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_failure, "cannot write checkpoint " + path.string());
  write_checkpoint(out, params);
  if (!out) throw Error(Errc::io_failure, "failed writing checkpoint " + path.string());
}

ModelParams read_checkpoint(std::istream& in, const std::string& what) {
  char magic[4] = {};
  if (!in.read(magic, 4)) throw Error(Errc::truncated, what + ": missing header");
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(Errc::bad_magic, what + ": not an OSMT checkpoint");
  const auto version = io::read_le<std::uint32_t>(in, what);
  if (version != kVersion) throw Error(Errc::bad_version, what + ": unsupported version " + std::to_string(version));

  ModelConfig c;
  const auto variant = io::read_le<std::uint32_t>(in, what);
  if (variant > 1) throw Error(Errc::invalid_config, what + ": unknown variant code " + std::to_string(variant));
  c.variant = static_cast<Variant>(variant);
  c.embed_dim = io::read_le<std::uint32_t>(in, what);
  c.hidden_dim = io::read_le<std::uint32_t>(in, what);
  c.layers = io::read_le<std::uint32_t>(in, what);
  c.image_dim = io::read_le<std::uint32_t>(in, what);
  c.src_vocab_size = io::read_le<std::uint32_t>(in, what);
  c.tgt_vocab_size = io::read_le<std::uint32_t>(in, what);
  c.dropout_rate = io::read_le<double>(in, what);

  ModelParams params = init_params(c, 0);
  auto list = params.parameters();
  const auto count = io::read_le<std::uint32_t>(in, what);
  if (count != list.size()) {
    throw Error(Errc::shape_mismatch, what + ": holds " + std::to_string(count) + " parameters, config implies " +
                                          std::to_string(list.size()));
  }
  std::vector<float> buffer;
  for (Parameter* p : list) {
    const auto name_len = io::read_le<std::uint32_t>(in, what);
    if (name_len > 4096) throw Error(Errc::bad_magic, what + ": implausible parameter name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw Error(Errc::truncated, what + ": parameter name cut short");
    if (name != p->name) throw Error(Errc::shape_mismatch, what + ": expected parameter " + p->name + ", found " + name);
    const auto rank = io::read_le<std::uint32_t>(in, what);
    Shape shape(rank);
    for (auto& d : shape) d = io::read_le<std::uint32_t>(in, what);
    if (shape != p->value.shape()) {
      throw Error(Errc::shape_mismatch, what + ": " + name + " has shape " + to_string(shape) + ", config implies " +
                                            to_string(p->value.shape()));
    }
    buffer.resize(p->value.size());
    if (!in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * sizeof(float)))) {
      throw Error(Errc::truncated, what + ": payload of " + name + " cut short");
    }
    auto values = p->value.values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = buffer[i];
    if (!p->value.all_finite()) throw Error(Errc::non_finite, what + ": non-finite value in " + name);
  }
  return params;
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open checkpoint " + path.string());
  return read_checkpoint(in, path.string());
}

void round_to_storage_precision(ModelParams& params) {
  for (Parameter* p : params.parameters()) {
    for (double& v : p->value.values()) v = static_cast<float>(v);
  }
}

}  // namespace mmt
