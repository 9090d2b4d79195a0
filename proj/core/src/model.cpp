#include "mmt/model.hpp"

#include <array>

#include "mmt/error.hpp"
#include "mmt/rng.hpp"

namespace mmt {

std::string_view to_string(Variant v) { return v == Variant::osu1 ? "osu1" : "osu2"; }

Variant parse_variant(std::string_view text) {
  if (text == "osu1" || text == "OSU1") return Variant::osu1;
  if (text == "osu2" || text == "OSU2") return Variant::osu2;
  throw Error(Errc::invalid_config, "unknown variant '" + std::string(text) + "' (expected osu1 or osu2)");
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(Errc::invalid_config, what);
  };
  require(embed_dim > 0, "embed_dim must be positive");
  require(hidden_dim > 0, "hidden_dim must be positive");
  require(layers > 0, "layers must be positive");
  require(src_vocab_size > static_cast<std::size_t>(kEosId), "source vocabulary must extend past the reserved ids");
  require(tgt_vocab_size > static_cast<std::size_t>(kEosId), "target vocabulary must extend past the reserved ids");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must lie in [0, 1)");
  require(!uses_image() || image_dim > 0, "osu1 needs a positive image_dim");
}

namespace {

constexpr std::array<const char*, 2> kDirection = {"fwd", "bwd"};

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed, "init") {}

  Parameter uniform(std::string name, Shape shape) {
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = rng_.uniform(-0.1, 0.1);
    return Parameter(std::move(name), std::move(t));
  }

  static Parameter zeros(std::string name, Shape shape) { return Parameter(std::move(name), Tensor(std::move(shape))); }

  LstmWeights lstm(const std::string& prefix, std::size_t in, std::size_t hidden) {
    LstmWeights w{uniform(prefix + ".input", {in, 4 * hidden}), uniform(prefix + ".recurrent", {hidden, 4 * hidden}),
                  zeros(prefix + ".bias", {4 * hidden})};
    for (std::size_t k = hidden; k < 2 * hidden; ++k) w.bias.value[k] = 1.0;
    return w;
  }

  Affine affine(const std::string& prefix, std::size_t in, std::size_t out) {
    return {uniform(prefix + ".weight", {in, out}), zeros(prefix + ".bias", {out})};
  }

 private:
  Rng rng_;
};

std::string layer_name(const char* what, std::size_t layer) { return std::string(what) + ".l" + std::to_string(layer); }

LstmState lstm_cell(const LstmWeights& w, Tape& tape, Var x, const LstmState& prev, std::size_t hidden) {
  Var gates = add(add(matmul(x, tape.parameter(w.input)), matmul(prev.h, tape.parameter(w.recurrent))),
                  tape.parameter(w.bias));
  Var in_gate = sigmoid(slice(gates, 0, hidden));
  Var forget_gate = sigmoid(slice(gates, hidden, hidden));
  Var candidate = tanh(slice(gates, 2 * hidden, hidden));
  Var out_gate = sigmoid(slice(gates, 3 * hidden, hidden));
  Var c = add(mul(forget_gate, prev.c), mul(in_gate, candidate));
  Var h = mul(out_gate, tanh(c));
  return {h, c};
}

Var affine(Tape& tape, const Affine& a, Var x) {
  return add(matmul(x, tape.parameter(a.weight)), tape.parameter(a.bias));
}

Var concat2(Var a, Var b) {
  const std::array<Var, 2> parts = {a, b};
  return concat(parts);
}

Var maybe_dropout(Tape& tape, const ModelParams& params, Var x) {
  if (!tape.training() || params.config.dropout_rate == 0.0) return x;
  return dropout(x, 1.0 - params.config.dropout_rate);
}

template <class Params, class Out>
void collect(Params& p, Out& out) {
  out.push_back(&p.src_embedding);
  out.push_back(&p.tgt_embedding);
  auto add_lstm = [&](auto& w) {
    out.push_back(&w.input);
    out.push_back(&w.recurrent);
    out.push_back(&w.bias);
  };
  auto add_affine = [&](auto& a) {
    out.push_back(&a.weight);
    out.push_back(&a.bias);
  };
  for (auto& w : p.encoder) add_lstm(w);
  for (auto& w : p.decoder) add_lstm(w);
  for (auto& a : p.bridge_h) add_affine(a);
  for (auto& a : p.bridge_c) add_affine(a);
  out.push_back(&p.attention);
  add_affine(p.combine);
  add_affine(p.output);
  for (auto& a : p.image_encoder_h) add_affine(a);
  for (auto& a : p.image_encoder_c) add_affine(a);
  for (auto& a : p.image_decoder_h) add_affine(a);
  for (auto& a : p.image_decoder_c) add_affine(a);
}

}  // namespace

std::vector<Parameter*> ModelParams::parameters() {
  std::vector<Parameter*> out;
  collect(*this, out);
  return out;
}

std::vector<const Parameter*> ModelParams::parameters() const {
  std::vector<const Parameter*> out;
  collect(*this, out);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->value.size();
  return n;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t e = config.embed_dim, h = config.hidden_dim;
  Initializer init(seed);
  ModelParams p;
  p.config = config;
  p.src_embedding = init.uniform("src_embedding", {config.src_vocab_size, e});
  p.tgt_embedding = init.uniform("tgt_embedding", {config.tgt_vocab_size, e});
  for (std::size_t l = 0; l < config.layers; ++l) {
    for (std::size_t d = 0; d < 2; ++d) {
      p.encoder.push_back(init.lstm(layer_name("encoder", l) + "." + kDirection[d], l == 0 ? e : 2 * h, h));
    }
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    p.decoder.push_back(init.lstm(layer_name("decoder", l), l == 0 ? e + h : h, h));
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    p.bridge_h.push_back(init.affine(layer_name("bridge", l) + ".h", 2 * h, h));
    p.bridge_c.push_back(init.affine(layer_name("bridge", l) + ".c", 2 * h, h));
  }
  p.attention = init.uniform("attention.weight", {h, 2 * h});
  p.combine = init.affine("combine", 3 * h, h);
  p.output = init.affine("output", h, config.tgt_vocab_size);
  if (config.uses_image()) {
    const std::size_t d_img = config.image_dim;
    for (std::size_t l = 0; l < config.layers; ++l) {
      for (std::size_t d = 0; d < 2; ++d) {
        const std::string prefix = "img." + layer_name("encoder", l) + "." + kDirection[d];
        p.image_encoder_h.push_back(init.affine(prefix + ".h", d_img, h));
        p.image_encoder_c.push_back(init.affine(prefix + ".c", d_img, h));
      }
    }
    for (std::size_t l = 0; l < config.layers; ++l) {
      const std::string prefix = "img." + layer_name("decoder", l);
      p.image_decoder_h.push_back(init.affine(prefix + ".h", d_img, h));
      p.image_decoder_c.push_back(init.affine(prefix + ".c", d_img, h));
    }
  }
  return p;
}

ImageStates image_to_init_states(Tape& tape, const ModelParams& params, const Tensor& images) {
  const auto& cfg = params.config;
  if (!cfg.uses_image()) throw Error(Errc::wrong_variant, "osu2 has no image pathway");
  if (images.rank() != 2 || images.dim(1) != cfg.image_dim) {
    throw Error(Errc::shape_mismatch, "image features " + to_string(images.shape()) + " do not match image_dim " +
                                          std::to_string(cfg.image_dim));
  }
  Var img = tape.constant(images);
  ImageStates out;
  for (std::size_t k = 0; k < params.image_encoder_h.size(); ++k) {
    out.encoder.push_back({tanh(affine(tape, params.image_encoder_h[k], img)),
                           tanh(affine(tape, params.image_encoder_c[k], img))});
  }
  for (std::size_t k = 0; k < params.image_decoder_h.size(); ++k) {
    out.decoder.push_back({tanh(affine(tape, params.image_decoder_h[k], img)),
                           tanh(affine(tape, params.image_decoder_c[k], img))});
  }
  return out;
}

EncoderStates encode(Tape& tape, const ModelParams& params, std::span<const int> source,
                     std::span<const std::size_t> lengths, const ImageStates* image) {
  const auto& cfg = params.config;
  const std::size_t batch = lengths.size();
  if (batch == 0 || source.size() % batch != 0) {
    throw Error(Errc::shape_mismatch, "encode: source of " + std::to_string(source.size()) + " ids for batch " +
                                          std::to_string(batch));
  }
  const std::size_t len = source.size() / batch;
  for (std::size_t n : lengths) {
    if (n == 0 || n > len) throw Error(Errc::shape_mismatch, "encode: source length " + std::to_string(n) + " outside [1," + std::to_string(len) + "]");
  }
  if (image != nullptr && image->encoder.size() != 2 * cfg.layers) {
    throw Error(Errc::shape_mismatch, "encode: image states do not match encoder depth");
  }
  const std::size_t h = cfg.hidden_dim;

  EncoderStates out;
  out.batch = batch;
  out.length = len;
  out.mask.assign(batch * len, 0);
  std::vector<std::vector<std::uint8_t>> live(len, std::vector<std::uint8_t>(batch, 0));
  std::vector<bool> all_live(len, true);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t t = 0; t < len; ++t) {
      const bool real = t < lengths[r];
      out.mask[r * len + t] = real;
      live[t][r] = real;
      if (!real) all_live[t] = false;
    }
  }

  std::vector<Var> inputs(len);
  std::vector<int> column(batch);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t r = 0; r < batch; ++r) column[r] = source[r * len + t];
    inputs[t] = embedding_lookup(tape.parameter(params.src_embedding), column);
  }

  const Var zeros = tape.constant(Tensor({batch, h}));
  out.finals.resize(2 * cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    std::array<std::vector<Var>, 2> outputs;
    for (std::size_t d = 0; d < 2; ++d) {
      const std::size_t idx = l * 2 + d;
      LstmState state = image ? image->encoder[idx] : LstmState{zeros, zeros};
      outputs[d].resize(len);
      for (std::size_t step = 0; step < len; ++step) {
        const std::size_t t = d == 0 ? step : len - 1 - step;
        LstmState next = lstm_cell(params.encoder[idx], tape, inputs[t], state, h);
        if (!all_live[t]) {
          next = {blend_rows(live[t], next.h, state.h), blend_rows(live[t], next.c, state.c)};
        }
        state = next;
        outputs[d][t] = state.h;
      }
      out.finals[idx] = state;
    }
    for (std::size_t t = 0; t < len; ++t) {
      Var joined = concat2(outputs[0][t], outputs[1][t]);
      inputs[t] = l + 1 < cfg.layers ? maybe_dropout(tape, params, joined) : joined;
    }
  }
  out.annotations = stack(inputs);
  return out;
}

AttentionResult attention_step(Tape& tape, const ModelParams& params, Var decoder_top, const EncoderStates& encoder) {
  Var query = matmul(decoder_top, tape.parameter(params.attention));
  Var scores = batched_matvec(encoder.annotations, query);
  Var weights = softmax(scores, encoder.mask);
  return {weighted_sum(weights, encoder.annotations), weights};
}

DecoderState decode_init(Tape& tape, const ModelParams& params, const EncoderStates& encoder,
                         const ImageStates* image) {
  const auto& cfg = params.config;
  if (cfg.uses_image() && image == nullptr) throw Error(Errc::missing_image, "osu1 decoding needs image states");
  if (!cfg.uses_image() && image != nullptr) throw Error(Errc::wrong_variant, "osu2 does not take image states");
  DecoderState state;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const LstmState& fwd = encoder.finals[l * 2];
    const LstmState& bwd = encoder.finals[l * 2 + 1];
    Var h = tanh(affine(tape, params.bridge_h[l], concat2(fwd.h, bwd.h)));
    Var c = tanh(affine(tape, params.bridge_c[l], concat2(fwd.c, bwd.c)));
    if (image) {
      h = add(h, image->decoder[l].h);
      c = add(c, image->decoder[l].c);
    }
    state.layers.push_back({h, c});
  }
  state.feed = tape.constant(Tensor({encoder.batch, cfg.hidden_dim}));
  return state;
}

Var embed_target(Tape& tape, const ModelParams& params, std::span<const int> ids) {
  return embedding_lookup(tape.parameter(params.tgt_embedding), ids);
}

StepResult decode_step(Tape& tape, const ModelParams& params, Var prev_embedding, const DecoderState& state,
                       const EncoderStates& encoder) {
  const auto& cfg = params.config;
  if (state.layers.size() != cfg.layers) throw Error(Errc::shape_mismatch, "decode_step: decoder state depth mismatch");
  StepResult out;
  Var x = concat2(prev_embedding, state.feed);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    if (l > 0) x = maybe_dropout(tape, params, x);
    LstmState next = lstm_cell(params.decoder[l], tape, x, state.layers[l], cfg.hidden_dim);
    out.state.layers.push_back(next);
    x = next.h;
  }
  AttentionResult att = attention_step(tape, params, x, encoder);
  Var attentional = tanh(affine(tape, params.combine, concat2(att.context, x)));
  out.logits = affine(tape, params.output, maybe_dropout(tape, params, attentional));
  out.state.feed = attentional;
  out.attention = att.weights;
  return out;
}

namespace {

Var masked_nll(Tape& tape, const ModelParams& params, const Batch& batch, double normalizer) {
  const auto& cfg = params.config;
  std::optional<ImageStates> image;
  if (cfg.uses_image()) {
    if (!batch.images) throw Error(Errc::missing_image, "osu1 batch carries no image features");
    image = image_to_init_states(tape, params, *batch.images);
  }
  const ImageStates* image_ptr = image ? &*image : nullptr;
  EncoderStates enc = encode(tape, params, batch.source, batch.source_lengths, image_ptr);
  DecoderState state = decode_init(tape, params, enc, image_ptr);

  const std::size_t rows = batch.size, steps = batch.tgt_len;
  std::vector<int> in(rows), out(rows);
  std::vector<double> mask(rows);
  std::optional<Var> total;
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t r = 0; r < rows; ++r) {
      in[r] = batch.target_in[r * steps + t];
      out[r] = batch.target_out[r * steps + t];
      mask[r] = batch.target_mask[r * steps + t];
    }
    StepResult step = decode_step(tape, params, embed_target(tape, params, in), state, enc);
    state = std::move(step.state);
    Var loss = cross_entropy(step.logits, out, mask, normalizer);
    total = total ? add(*total, loss) : loss;
  }
  return *total;
}

}  // namespace

Var sequence_loss(Tape& tape, const ModelParams& params, const Batch& batch) {
  const double tokens = batch.token_count();
  if (!(tokens > 0)) throw Error(Errc::empty_input, "batch has no target tokens");
  return masked_nll(tape, params, batch, tokens);
}

double sequence_nll_sum(const ModelParams& params, const Batch& batch) {
  Tape tape(Mode::inference);
  return masked_nll(tape, params, batch, 1.0).value()[0];
}

}  // namespace mmt
