#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mmt/tape.hpp"

namespace mmt {

enum class OpKind {
  matmul,
  add,
  mul_elementwise,
  scale,
  concat_last_axis,
  slice_last_axis,
  tanh,
  sigmoid,
  softmax_last_axis,
  embedding_lookup,
  dropout,
  cross_entropy_with_mask,
  sum,
  stack,
  batched_matvec,
  weighted_sum,
  blend_rows,
};

std::string_view to_string(OpKind kind);

/// (M x K) * (K x N).
Var matmul(Var a, Var b);
/// Elementwise sum. `b` may also be a row vector of length cols(a), broadcast over rows.
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var concat(std::span<const Var> parts);
Var slice(Var a, std::size_t start, std::size_t length);
Var tanh(Var a);
Var sigmoid(Var a);

/// Softmax over the last axis. Entries whose mask byte is 0 get probability
/// exactly 0; a row with every entry masked is an error. Empty mask = none.
Var softmax(Var logits, std::span<const std::uint8_t> mask = {});

/// Rows of `table` (V x D) selected by `ids`, giving (ids.size() x D).
Var embedding_lookup(Var table, std::span<const int> ids);

/// Inverted dropout: in training mode each entry survives with probability
/// `keep_prob` and is scaled by 1/keep_prob. Identity in inference mode.
Var dropout(Var a, double keep_prob);

/// Sum over rows r of mask[r] * -log softmax(logits[r])[targets[r]], divided by
/// `normalizer`. Returns a scalar.
Var cross_entropy(Var logits, std::span<const int> targets, std::span<const double> mask,
                  double normalizer = 1.0);

Var sum(Var a);

/// Stacks S tensors of shape (R x D) into (R x S x D).
Var stack(std::span<const Var> steps);
/// out[r, s] = sum_d seq[r, s, d] * query[r, d]; seq is (R x S x D), query (R x D).
Var batched_matvec(Var seq, Var query);
/// out[r, d] = sum_s weights[r, s] * seq[r, s, d].
Var weighted_sum(Var weights, Var seq);
/// Row r of the result is row r of `a` when take_a[r] != 0, else row r of `b`.
Var blend_rows(std::span<const std::uint8_t> take_a, Var a, Var b);

}  // namespace mmt
