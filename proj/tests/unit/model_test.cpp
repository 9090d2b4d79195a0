#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "fixtures.hpp"
#include "mmt/error.hpp"
#include "mmt/model.hpp"

namespace mmt {
namespace {

using testing::tiny_config;

Tensor image_batch(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed, "test");
  Tensor t({rows, dim});
  for (double& v : t.values()) v = 3.0 * rng.normal();
  return t;
}

void zero_image_biases(ModelParams& p) {
  for (auto* group : {&p.image_encoder_h, &p.image_encoder_c, &p.image_decoder_h, &p.image_decoder_c}) {
    for (Affine& a : *group) a.bias.value.fill(0.0);
  }
}

TEST(Init, SameSeedIsBitIdentical) {
  const auto cfg = tiny_config(Variant::osu1);
  const ModelParams a = init_params(cfg, 9), b = init_params(cfg, 9);
  const auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->name, pb[i]->name);
    EXPECT_EQ(pa[i]->value, pb[i]->value);
  }
  EXPECT_NE(init_params(cfg, 10).src_embedding.value, a.src_embedding.value);
}

TEST(Init, Osu2HasNoImageParameters) {
  const ModelParams p = init_params(tiny_config(Variant::osu2), 1);
  for (const Parameter* param : p.parameters()) EXPECT_EQ(param->name.find("img"), std::string::npos) << param->name;
  EXPECT_THROW(init_params(tiny_config(Variant::osu1, 12, 0), 1), Error);
}

TEST(Init, VariantsShareTextWeights) {
  const ModelParams p1 = init_params(tiny_config(Variant::osu1), 5);
  const ModelParams p2 = init_params(tiny_config(Variant::osu2), 5);
  std::map<std::string, Tensor> text;
  for (const Parameter* p : p2.parameters()) text[p->name] = p->value;
  std::size_t shared = 0;
  for (const Parameter* p : p1.parameters()) {
    auto it = text.find(p->name);
    if (it == text.end()) continue;
    EXPECT_EQ(it->second, p->value) << p->name;
    ++shared;
  }
  EXPECT_EQ(shared, text.size());
}

TEST(Init, RangesAndForgetBias) {
  const ModelParams p = init_params(tiny_config(Variant::osu1), 2);
  for (const Parameter* param : p.parameters()) {
    for (double v : param->value.values()) {
      if (param->name.ends_with(".bias") && param->name.find("coder.l") != std::string::npos &&
          param->name.find("img") == std::string::npos && param->name.find("bridge") == std::string::npos) {
        EXPECT_TRUE(v == 0.0 || v == 1.0) << param->name;
      } else {
        EXPECT_LE(std::abs(v), 0.1) << param->name;
      }
    }
  }
  const Tensor& bias = p.encoder[0].bias.value;
  EXPECT_EQ(bias[0], 0.0);
  EXPECT_EQ(bias[8], 1.0);
  EXPECT_EQ(bias[15], 1.0);
  EXPECT_EQ(bias[16], 0.0);
}

TEST(ImageInit, ZeroImageAndBiasGiveZeroStates) {
  ModelParams p = init_params(tiny_config(Variant::osu1), 3);
  zero_image_biases(p);
  Tape tape(Mode::inference);
  const ImageStates s = image_to_init_states(tape, p, Tensor({2, 6}));
  for (const auto& group : {s.encoder, s.decoder}) {
    for (const LstmState& st : group) {
      for (double v : st.h.value().values()) EXPECT_EQ(v, 0.0);
      for (double v : st.c.value().values()) EXPECT_EQ(v, 0.0);
    }
  }
  EXPECT_EQ(s.encoder.size(), 4u);
  EXPECT_EQ(s.decoder.size(), 2u);
}

TEST(ImageInit, StatesLieInOpenUnitInterval) {
  const ModelParams p = init_params(tiny_config(Variant::osu1), 3);
  Tape tape(Mode::inference);
  const ImageStates s = image_to_init_states(tape, p, image_batch(3, 6, 1));
  for (const LstmState& st : s.encoder) {
    for (double v : st.h.value().values()) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(ImageInit, RejectsOsu2AndBadDimension) {
  const ModelParams p2 = init_params(tiny_config(Variant::osu2), 3);
  Tape tape(Mode::inference);
  try {
    image_to_init_states(tape, p2, Tensor({1, 6}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::wrong_variant);
  }
  const ModelParams p1 = init_params(tiny_config(Variant::osu1), 3);
  EXPECT_THROW(image_to_init_states(tape, p1, Tensor({1, 5})), Error);
}

TEST(Encoder, SingleTokenSentence) {
  const ModelParams p = init_params(tiny_config(Variant::osu2), 4);
  Tape tape(Mode::inference);
  const std::vector<int> src = {7};
  const std::vector<std::size_t> len = {1};
  const EncoderStates enc = encode(tape, p, src, len, nullptr);
  EXPECT_EQ(enc.annotations.shape(), (Shape{1, 1, 16}));
  // Top-layer annotation is [fwd final h; bwd final h].
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(enc.annotations.value()[k], enc.finals[2].h.value()[k]);
    EXPECT_EQ(enc.annotations.value()[8 + k], enc.finals[3].h.value()[k]);
  }
}

TEST(Encoder, ReversalSwapsDirectionsWhenWeightsAreShared) {
  auto cfg = tiny_config(Variant::osu2);
  cfg.layers = 1;
  ModelParams p = init_params(cfg, 6);
  p.encoder[1].input.value = p.encoder[0].input.value;
  p.encoder[1].recurrent.value = p.encoder[0].recurrent.value;
  p.encoder[1].bias.value = p.encoder[0].bias.value;
  const std::vector<int> fwd = {4, 9, 6}, rev = {6, 9, 4};
  const std::vector<std::size_t> len = {3};
  Tape tape(Mode::inference);
  const Tensor a = encode(tape, p, fwd, len, nullptr).annotations.value();
  const Tensor b = encode(tape, p, rev, len, nullptr).annotations.value();
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t k = 0; k < 8; ++k) {
      EXPECT_NEAR(a[t * 16 + k], b[(2 - t) * 16 + 8 + k], 1e-15);
      EXPECT_NEAR(a[t * 16 + 8 + k], b[(2 - t) * 16 + k], 1e-15);
    }
  }
}

TEST(Encoder, PaddingDoesNotLeakIntoShorterRows) {
  const ModelParams p = init_params(tiny_config(Variant::osu2), 4);
  Tape tape(Mode::inference);
  const std::vector<int> alone = {5, 6};
  const std::vector<std::size_t> alone_len = {2};
  const EncoderStates a = encode(tape, p, alone, alone_len, nullptr);
  const std::vector<int> padded = {5, 6, kPadId, kPadId, 7, 8, 9, 10};
  const std::vector<std::size_t> padded_len = {2, 4};
  const EncoderStates b = encode(tape, p, padded, padded_len, nullptr);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(a.finals[i].h.value()[3], b.finals[i].h.value()[3], 1e-15);
  }
  for (std::size_t k = 0; k < 32; ++k) EXPECT_NEAR(a.annotations.value()[k], b.annotations.value()[k], 1e-15);
  EXPECT_EQ(b.mask, (std::vector<std::uint8_t>{1, 1, 0, 0, 1, 1, 1, 1}));
  const std::vector<std::size_t> bad_len = {0, 4};
  EXPECT_THROW(encode(tape, p, padded, bad_len, nullptr), Error);
}

EncoderStates handmade_annotations(Tape& tape, std::size_t len, std::vector<double> values,
                                   std::vector<std::uint8_t> mask) {
  EncoderStates enc;
  enc.batch = 1;
  enc.length = len;
  enc.annotations = tape.constant(Tensor({1, len, 2}, std::move(values)));
  enc.mask = std::move(mask);
  return enc;
}

TEST(Attention, HandComputedWeights) {
  auto cfg = tiny_config(Variant::osu2);
  cfg.hidden_dim = 1;
  ModelParams p = init_params(cfg, 1);
  p.attention.value = Tensor::matrix(1, 2, {1, 0});
  Tape tape(Mode::inference);
  const EncoderStates enc = handmade_annotations(tape, 2, {std::log(3.0), 5.0, 0.0, -1.0}, {1, 1});
  const AttentionResult r = attention_step(tape, p, tape.constant(Tensor::matrix(1, 1, {1})), enc);
  EXPECT_NEAR(r.weights.value()[0], 0.75, 1e-12);
  EXPECT_NEAR(r.weights.value()[1], 0.25, 1e-12);
  EXPECT_NEAR(r.context.value()[0], 0.75 * std::log(3.0), 1e-12);
  EXPECT_NEAR(r.context.value()[1], 0.75 * 5.0 - 0.25, 1e-12);
}

TEST(Attention, SinglePositionAndUniformScores) {
  auto cfg = tiny_config(Variant::osu2);
  cfg.hidden_dim = 1;
  ModelParams p = init_params(cfg, 1);
  Tape tape(Mode::inference);
  const EncoderStates one = handmade_annotations(tape, 1, {0.3, -0.2}, {1});
  const AttentionResult r1 = attention_step(tape, p, tape.constant(Tensor::matrix(1, 1, {2})), one);
  EXPECT_EQ(r1.weights.value()[0], 1.0);
  EXPECT_EQ(r1.context.value(), Tensor::matrix(1, 2, {0.3, -0.2}));
  p.attention.value.fill(0.0);
  const EncoderStates three = handmade_annotations(tape, 3, {1, 2, 3, 4, 5, 6}, {1, 1, 1});
  const AttentionResult r3 = attention_step(tape, p, tape.constant(Tensor::matrix(1, 1, {2})), three);
  for (double w : r3.weights.value().values()) EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
  const EncoderStates none = handmade_annotations(tape, 2, {1, 2, 3, 4}, {0, 0});
  EXPECT_THROW(attention_step(tape, p, tape.constant(Tensor::matrix(1, 1, {2})), none), Error);
}

TEST(Attention, WeightsAreADistributionOverRealPositions) {
  const ModelParams p = init_params(tiny_config(Variant::osu2), 8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Corpus c = testing::random_corpus(seed, 4, 12, 6, 0);
    const Batch b = make_batch(c, testing::iota_indices(4));
    Tape tape(Mode::inference);
    const EncoderStates enc = encode(tape, p, b.source, b.source_lengths, nullptr);
    const DecoderState st = decode_init(tape, p, enc, nullptr);
    const std::vector<int> bos(4, kBosId);
    const StepResult step = decode_step(tape, p, embed_target(tape, p, bos), st, enc);
    const Tensor& w = step.attention.value();
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t s = 0; s < b.src_len; ++s) {
        const double v = w.at(r, s);
        EXPECT_GE(v, 0.0);
        if (s >= b.source_lengths[r]) EXPECT_EQ(v, 0.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

struct Prepared {
  ModelParams osu1;
  ModelParams osu2;
  Batch batch;
};

Prepared prepared(std::uint64_t seed) {
  Prepared out{init_params(tiny_config(Variant::osu1), seed), init_params(tiny_config(Variant::osu2), seed), {}};
  const Corpus c = testing::random_corpus(seed + 100, 3, 12, 5, 6);
  out.batch = make_batch(c, testing::iota_indices(3));
  return out;
}

TEST(Decoder, InitRequiresImageExactlyForOsu1) {
  Prepared p = prepared(1);
  Tape tape(Mode::inference);
  const EncoderStates enc = encode(tape, p.osu2, p.batch.source, p.batch.source_lengths, nullptr);
  try {
    decode_init(tape, p.osu1, enc, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_image);
  }
  const ImageStates img = image_to_init_states(tape, p.osu1, *p.batch.images);
  EXPECT_THROW(decode_init(tape, p.osu2, enc, &img), Error);
}

TEST(Decoder, StatesAreBoundedAndFeedStartsAtZero) {
  Prepared p = prepared(2);
  Tape tape(Mode::inference);
  const ImageStates img = image_to_init_states(tape, p.osu1, *p.batch.images);
  const EncoderStates enc = encode(tape, p.osu1, p.batch.source, p.batch.source_lengths, &img);
  const DecoderState st = decode_init(tape, p.osu1, enc, &img);
  for (const LstmState& l : st.layers) {
    for (double v : l.h.value().values()) EXPECT_LT(std::abs(v), 2.0);
    for (double v : l.c.value().values()) EXPECT_LT(std::abs(v), 2.0);
  }
  for (double v : st.feed.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Decoder, ZeroImageOsu1MatchesOsu2) {
  Prepared p = prepared(3);
  zero_image_biases(p.osu1);
  p.batch.images->fill(0.0);
  Tape t1(Mode::inference), t2(Mode::inference);
  EXPECT_EQ(sequence_loss(t1, p.osu1, p.batch).value(), sequence_loss(t2, p.osu2, p.batch).value());
}

TEST(Decoder, Osu2IgnoresImagesBitwise) {
  Prepared p = prepared(4);
  Tape t1(Mode::training, 3), t2(Mode::training, 3);
  const double with = sequence_loss(t1, p.osu2, p.batch).value()[0];
  Batch other = p.batch;
  other.images = image_batch(3, 6, 77);
  EXPECT_EQ(sequence_loss(t2, p.osu2, other).value()[0], with);
  other.images.reset();
  Tape t3(Mode::training, 3);
  EXPECT_EQ(sequence_loss(t3, p.osu2, other).value()[0], with);
  Tape t4(Mode::inference);
  EXPECT_THROW(sequence_loss(t4, p.osu1, other), Error);
}

TEST(Decoder, StepShapesAndDeterminism) {
  Prepared p = prepared(5);
  auto run = [&] {
    Tape tape(Mode::inference);
    const ImageStates img = image_to_init_states(tape, p.osu1, *p.batch.images);
    const EncoderStates enc = encode(tape, p.osu1, p.batch.source, p.batch.source_lengths, &img);
    const DecoderState st = decode_init(tape, p.osu1, enc, &img);
    const std::vector<int> bos(3, kBosId);
    const StepResult r = decode_step(tape, p.osu1, embed_target(tape, p.osu1, bos), st, enc);
    return r.logits.value();
  };
  const Tensor a = run();
  EXPECT_EQ(a.shape(), (Shape{3, 12}));
  EXPECT_EQ(run(), a);
}

TEST(Decoder, UniformModelLossIsNearLogV) {
  auto cfg = tiny_config(Variant::osu2, 40);
  const ModelParams p = init_params(cfg, 6);
  const Corpus c = testing::random_corpus(9, 20, 40, 6, 0);
  const Batch b = make_batch(c, testing::iota_indices(20));
  const double mean = sequence_nll_sum(p, b) / b.token_count();
  EXPECT_NEAR(mean, std::log(40.0), 0.05 * std::log(40.0));
}

TEST(Variants, ParseAndPrint) {
  EXPECT_EQ(parse_variant("osu1"), Variant::osu1);
  EXPECT_EQ(parse_variant("OSU2"), Variant::osu2);
  EXPECT_EQ(to_string(Variant::osu2), "osu2");
  EXPECT_THROW(parse_variant("osu3"), Error);
}

}  // namespace
}  // namespace mmt
