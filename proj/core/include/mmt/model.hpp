#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mmt/corpus.hpp"
#include "mmt/ops.hpp"
#include "mmt/tape.hpp"

namespace mmt {

/// osu1 grounds encoder and decoder initial states in the image feature;
/// osu2 is the same network with the image pathway removed.
enum class Variant : std::uint32_t { osu1 = 0, osu2 = 1 };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

struct ModelConfig {
  Variant variant = Variant::osu1;
  std::size_t embed_dim = 500;
  std::size_t hidden_dim = 500;
  /// Depth of the bidirectional encoder; the decoder uses the same depth.
  std::size_t layers = 2;
  std::size_t image_dim = 2048;
  double dropout_rate = 0.6;
  std::size_t src_vocab_size = 0;
  std::size_t tgt_vocab_size = 0;

  bool uses_image() const noexcept { return variant == Variant::osu1; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LstmWeights {
  Parameter input;      ///< in x 4H, gate order i, f, g, o
  Parameter recurrent;  ///< H x 4H
  Parameter bias;       ///< 4H
};

struct Affine {
  Parameter weight;  ///< in x out
  Parameter bias;    ///< out
};

struct ModelParams {
  ModelConfig config;
  Parameter src_embedding;
  Parameter tgt_embedding;
  std::vector<LstmWeights> encoder;  ///< index layer * 2 + direction (0 forward, 1 backward)
  std::vector<LstmWeights> decoder;  ///< one per layer
  std::vector<Affine> bridge_h;      ///< per decoder layer, 2H -> H
  std::vector<Affine> bridge_c;
  Parameter attention;  ///< H x 2H bilinear score matrix
  Affine combine;       ///< [context; h] (3H) -> H
  Affine output;        ///< H -> target vocabulary
  std::vector<Affine> image_encoder_h;  ///< osu1 only, layer * 2 + direction
  std::vector<Affine> image_encoder_c;
  std::vector<Affine> image_decoder_h;  ///< osu1 only, per decoder layer
  std::vector<Affine> image_decoder_c;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
};

/// Weights ~ U(-0.1, 0.1) from the "init" stream of `seed`; biases zero except
/// LSTM forget gates, which start at 1. Image parameters are drawn last so osu1
/// and osu2 built from one seed share every text-side weight.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

struct LstmState {
  Var h;
  Var c;
};

struct ImageStates {
  std::vector<LstmState> encoder;  ///< layer * 2 + direction
  std::vector<LstmState> decoder;  ///< per layer
};

/// tanh(image * W + b) for every encoder layer/direction and decoder layer.
ImageStates image_to_init_states(Tape& tape, const ModelParams& params, const Tensor& images);

struct EncoderStates {
  Var annotations;                 ///< batch x length x 2H
  std::vector<std::uint8_t> mask;  ///< batch x length, 1 on real source positions
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<LstmState> finals;   ///< layer * 2 + direction
};

/// Two-layer (by default) bidirectional LSTM over the embedded source. Layer
/// inputs above the first pass through dropout. Initial states come from
/// `image` when given, zeros otherwise.
EncoderStates encode(Tape& tape, const ModelParams& params, std::span<const int> source,
                     std::span<const std::size_t> lengths, const ImageStates* image);

struct AttentionResult {
  Var context;  ///< batch x 2H
  Var weights;  ///< batch x length
};

AttentionResult attention_step(Tape& tape, const ModelParams& params, Var decoder_top, const EncoderStates& encoder);

struct DecoderState {
  std::vector<LstmState> layers;
  Var feed;  ///< previous attentional vector, batch x H
};

/// Bridge tanh(W [h_fwd; h_bwd] + b) per layer (same for c), plus the image
/// states for osu1. `image` must be given exactly when the variant uses it.
DecoderState decode_init(Tape& tape, const ModelParams& params, const EncoderStates& encoder,
                         const ImageStates* image);

struct StepResult {
  Var logits;  ///< batch x tgt_vocab
  DecoderState state;
  Var attention;
};

StepResult decode_step(Tape& tape, const ModelParams& params, Var prev_embedding, const DecoderState& state,
                       const EncoderStates& encoder);

Var embed_target(Tape& tape, const ModelParams& params, std::span<const int> ids);

/// Teacher-forced cross-entropy averaged over the non-PAD target tokens of the
/// batch. The batch's images are ignored by osu2.
Var sequence_loss(Tape& tape, const ModelParams& params, const Batch& batch);

/// Sum (not mean) of the masked token NLL; used for corpus-level averages.
double sequence_nll_sum(const ModelParams& params, const Batch& batch);

}  // namespace mmt
