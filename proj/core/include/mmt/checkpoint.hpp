#pragma once

#include <filesystem>
#include <iosfwd>

#include "mmt/model.hpp"

namespace mmt {

/// OSMT layout, little-endian:
///   "OSMT", u32 version (1),
///   config: u32 variant, u32 embed_dim, u32 hidden_dim, u32 layers,
///           u32 image_dim, u32 src_vocab, u32 tgt_vocab, f64 dropout_rate,
///   u32 parameter count, then per parameter:
///           u32 name length, name bytes, u32 rank, u32 dims..., f32 values.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
void write_checkpoint(std::ostream& out, const ModelParams& params);

/// Loads a checkpoint, validating every parameter name and shape against the
/// stored config. Values come back rounded to 32-bit precision.
ModelParams load_checkpoint(const std::filesystem::path& path);
ModelParams read_checkpoint(std::istream& in, const std::string& what = "checkpoint");

/// Rounds every parameter to float precision, i.e. what a save/load cycle yields.
void round_to_storage_precision(ModelParams& params);

}  // namespace mmt
