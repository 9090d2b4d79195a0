#include "mmt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "mmt/error.hpp"

namespace mmt {

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::mul_elementwise: return "mul_elementwise";
    case OpKind::scale: return "scale";
    case OpKind::concat_last_axis: return "concat_last_axis";
    case OpKind::slice_last_axis: return "slice_last_axis";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::softmax_last_axis: return "softmax_last_axis";
    case OpKind::embedding_lookup: return "embedding_lookup";
    case OpKind::dropout: return "dropout";
    case OpKind::cross_entropy_with_mask: return "cross_entropy_with_mask";
    case OpKind::sum: return "sum";
    case OpKind::stack: return "stack";
    case OpKind::batched_matvec: return "batched_matvec";
    case OpKind::weighted_sum: return "weighted_sum";
    case OpKind::blend_rows: return "blend_rows";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_error(OpKind kind, std::initializer_list<Shape> shapes, std::string_view detail = {}) {
  std::string msg(to_string(kind));
  msg += ": incompatible shapes";
  for (const auto& s : shapes) msg += " " + to_string(s);
  if (!detail.empty()) {
    msg += " (";
    msg += detail;
    msg += ")";
  }
  throw Error(Errc::shape_mismatch, msg);
}

Tape& same_tape(OpKind kind, Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw Error(Errc::not_on_tape, std::string(to_string(kind)) + ": operands live on different tapes");
  }
  return *a.tape;
}

Tape& tape_of(OpKind kind, Var a) {
  if (a.tape == nullptr) throw Error(Errc::not_on_tape, std::string(to_string(kind)) + ": unbound operand");
  return *a.tape;
}

void accumulate(Tensor& dst, const Tensor& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m x k] += a[m x n] * b[k x n]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
      ci[p] += acc;
    }
  }
}

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

template <class F, class G>
Var unary(OpKind kind, Var a, F forward, G derivative_from_output) {
  Tape& tape = tape_of(kind, a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  const std::size_t in = a.id;
  return tape.record(std::move(y), {in}, [in, derivative_from_output](Tape& t, std::size_t self) {
    const Tensor& out = t.value(self);
    const Tensor& dy = t.grad(self);
    Tensor& dx = t.grad(in);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * derivative_from_output(out[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(OpKind::matmul, a, b);
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0)) {
    shape_error(OpKind::matmul, {x.shape(), w.shape()});
  }
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  Tensor y({m, n});
  gemm_nn(x.data(), w.data(), y.data(), m, k, n);
  const std::size_t ia = a.id, ib = b.id;
  return tape.record(std::move(y), {ia, ib}, [ia, ib, m, k, n](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    if (t.needs_grad(ia)) gemm_nt(dy.data(), t.value(ib).data(), t.grad(ia).data(), m, n, k);
    if (t.needs_grad(ib)) gemm_tn(t.value(ia).data(), dy.data(), t.grad(ib).data(), m, k, n);
  });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(OpKind::add, a, b);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  const std::size_t ia = a.id, ib = b.id;
  if (x.shape() == z.shape()) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + z[i];
    return tape.record(std::move(y), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
      const Tensor& dy = t.grad(self);
      if (t.needs_grad(ia)) accumulate(t.grad(ia), dy);
      if (t.needs_grad(ib)) accumulate(t.grad(ib), dy);
    });
  }
  const bool row_vector = (z.rank() == 1 || (z.rank() == 2 && z.dim(0) == 1)) && z.size() == x.cols();
  if (!row_vector) shape_error(OpKind::add, {x.shape(), z.shape()});
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = x[r * cols + c] + z[c];
  }
  return tape.record(std::move(y), {ia, ib}, [ia, ib, rows, cols](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    if (t.needs_grad(ia)) accumulate(t.grad(ia), dy);
    if (t.needs_grad(ib)) {
      Tensor& db = t.grad(ib);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) db[c] += dy[r * cols + c];
      }
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(OpKind::mul_elementwise, a, b);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  if (x.shape() != z.shape()) shape_error(OpKind::mul_elementwise, {x.shape(), z.shape()});
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * z[i];
  const std::size_t ia = a.id, ib = b.id;
  return tape.record(std::move(y), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor& da = t.grad(ia);
      const Tensor& zb = t.value(ib);
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i] * zb[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& db = t.grad(ib);
      const Tensor& xa = t.value(ia);
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[i] * xa[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tape& tape = tape_of(OpKind::scale, a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * factor;
  const std::size_t ia = a.id;
  return tape.record(std::move(y), {ia}, [ia, factor](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    Tensor& da = t.grad(ia);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i] * factor;
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw Error(Errc::shape_mismatch, "concat_last_axis: no inputs");
  Tape& tape = tape_of(OpKind::concat_last_axis, parts[0]);
  const Shape& lead = parts[0].shape();
  const std::size_t rows = parts[0].value().rows();
  std::vector<std::size_t> ids, widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.tape != &tape) throw Error(Errc::not_on_tape, "concat_last_axis: operands live on different tapes");
    const Tensor& v = p.value();
    if (v.rank() != lead.size() || !std::equal(lead.begin(), lead.end() - 1, v.shape().begin())) {
      shape_error(OpKind::concat_last_axis, {lead, v.shape()});
    }
    ids.push_back(p.id);
    widths.push_back(v.cols());
    total += v.cols();
  }
  Shape shape = lead;
  shape.back() = total;
  Tensor y(shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * widths[k], widths[k], y.data() + r * total + offset);
    }
    offset += widths[k];
  }
  auto inputs = ids;
  return tape.record(std::move(y), std::move(inputs),
                     [ids = std::move(ids), widths = std::move(widths), rows, total](Tape& t, std::size_t self) {
                       const Tensor& dy = t.grad(self);
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         if (t.needs_grad(ids[k])) {
                           Tensor& dx = t.grad(ids[k]);
                           for (std::size_t r = 0; r < rows; ++r) {
                             const double* src = dy.data() + r * total + off;
                             double* dst = dx.data() + r * widths[k];
                             for (std::size_t c = 0; c < widths[k]; ++c) dst[c] += src[c];
                           }
                         }
                         off += widths[k];
                       }
                     });
}

Var slice(Var a, std::size_t start, std::size_t length) {
  Tape& tape = tape_of(OpKind::slice_last_axis, a);
  const Tensor& x = a.value();
  const std::size_t cols = x.cols();
  if (length == 0 || start + length > cols) {
    shape_error(OpKind::slice_last_axis, {x.shape()},
                "range [" + std::to_string(start) + "," + std::to_string(start + length) + ")");
  }
  Shape shape = x.shape();
  shape.back() = length;
  const std::size_t rows = x.rows();
  Tensor y(shape);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.data() + r * cols + start, length, y.data() + r * length);
  const std::size_t ia = a.id;
  return tape.record(std::move(y), {ia}, [ia, rows, cols, start, length](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    Tensor& dx = t.grad(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < length; ++c) dx[r * cols + start + c] += dy[r * length + c];
    }
  });
}

Var tanh(Var a) {
  return unary(OpKind::tanh, a, [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      OpKind::sigmoid, a,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

Var softmax(Var logits, std::span<const std::uint8_t> mask) {
  Tape& tape = tape_of(OpKind::softmax_last_axis, logits);
  const Tensor& x = logits.value();
  if (!mask.empty() && mask.size() != x.size()) {
    shape_error(OpKind::softmax_last_axis, {x.shape(), Shape{mask.size()}}, "mask size");
  }
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double* yr = y.data() + r * cols;
    auto live = [&](std::size_t c) { return mask.empty() || mask[r * cols + c] != 0; };
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      if (live(c)) mx = std::max(mx, xr[c]);
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw Error(Errc::invalid_argument, "softmax_last_axis: row " + std::to_string(r) + " is fully masked");
    }
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = live(c) ? std::exp(xr[c] - mx) : 0.0;
      z += yr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= z;
  }
  const std::size_t ia = logits.id;
  return tape.record(std::move(y), {ia}, [ia, rows, cols](Tape& t, std::size_t self) {
    const Tensor& out = t.value(self);
    const Tensor& dy = t.grad(self);
    Tensor& dx = t.grad(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yr = out.data() + r * cols;
      const double* gr = dy.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += yr[c] * gr[c];
      double* dr = dx.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) dr[c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var embedding_lookup(Var table, std::span<const int> ids) {
  Tape& tape = tape_of(OpKind::embedding_lookup, table);
  const Tensor& e = table.value();
  if (e.rank() != 2 || ids.empty()) shape_error(OpKind::embedding_lookup, {e.shape(), Shape{ids.size()}});
  const std::size_t vocab = e.dim(0), width = e.dim(1);
  Tensor y({ids.size(), width});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab) {
      throw Error(Errc::out_of_range, "embedding_lookup: id " + std::to_string(ids[r]) + " outside table of " +
                                          std::to_string(vocab) + " rows");
    }
    std::copy_n(e.data() + static_cast<std::size_t>(ids[r]) * width, width, y.data() + r * width);
  }
  const std::size_t ia = table.id;
  return tape.record(std::move(y), {ia}, [ia, width, rows = std::vector<int>(ids.begin(), ids.end())](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    Tensor& de = t.grad(ia);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double* dst = de.data() + static_cast<std::size_t>(rows[r]) * width;
      const double* src = dy.data() + r * width;
      for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
    }
  });
}

Var dropout(Var a, double keep_prob) {
  Tape& tape = tape_of(OpKind::dropout, a);
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw Error(Errc::invalid_argument, "dropout: keep probability " + std::to_string(keep_prob) + " outside (0,1]");
  }
  if (!tape.training() || keep_prob == 1.0) return a;
  const Tensor& x = a.value();
  auto mask = std::make_shared<std::vector<double>>(x.size());
  Rng& rng = tape.dropout_rng();
  const double inv = 1.0 / keep_prob;
  for (auto& m : *mask) m = rng.uniform() < keep_prob ? inv : 0.0;
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * (*mask)[i];
  const std::size_t ia = a.id;
  return tape.record(std::move(y), {ia}, [ia, mask](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    Tensor& dx = t.grad(ia);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * (*mask)[i];
  });
}

Var cross_entropy(Var logits, std::span<const int> targets, std::span<const double> mask, double normalizer) {
  Tape& tape = tape_of(OpKind::cross_entropy_with_mask, logits);
  const Tensor& x = logits.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  if (targets.size() != rows || mask.size() != rows) {
    shape_error(OpKind::cross_entropy_with_mask, {x.shape(), Shape{targets.size()}, Shape{mask.size()}});
  }
  if (!(normalizer > 0.0)) throw Error(Errc::invalid_argument, "cross_entropy_with_mask: normalizer must be positive");
  auto probs = std::make_shared<std::vector<double>>(x.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= cols) {
      throw Error(Errc::out_of_range, "cross_entropy_with_mask: target id " + std::to_string(targets[r]) +
                                          " >= class count " + std::to_string(cols));
    }
    const double* xr = x.data() + r * cols;
    double* pr = probs->data() + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      pr[c] = std::exp(xr[c] - mx);
      z += pr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) pr[c] /= z;
    if (mask[r] != 0.0) loss += mask[r] * -(xr[targets[r]] - mx - std::log(z));
  }
  const std::size_t ia = logits.id;
  return tape.record(
      Tensor::scalar(loss / normalizer), {ia},
      [ia, rows, cols, probs, normalizer, tg = std::vector<int>(targets.begin(), targets.end()),
       mk = std::vector<double>(mask.begin(), mask.end())](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0] / normalizer;
        Tensor& dx = t.grad(ia);
        for (std::size_t r = 0; r < rows; ++r) {
          if (mk[r] == 0.0) continue;
          const double w = g * mk[r];
          const double* pr = probs->data() + r * cols;
          double* dr = dx.data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) dr[c] += w * pr[c];
          dr[tg[r]] -= w;
        }
      });
}

Var sum(Var a) {
  Tape& tape = tape_of(OpKind::sum, a);
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.values()) s += v;
  const std::size_t ia = a.id;
  return tape.record(Tensor::scalar(s), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& dx = t.grad(ia);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g;
  });
}

Var stack(std::span<const Var> steps) {
  if (steps.empty()) throw Error(Errc::shape_mismatch, "stack: no inputs");
  Tape& tape = tape_of(OpKind::stack, steps[0]);
  const Shape first = steps[0].shape();
  if (first.size() != 2) shape_error(OpKind::stack, {first});
  const std::size_t rows = first[0], width = first[1], len = steps.size();
  std::vector<std::size_t> ids;
  Tensor y({rows, len, width});
  for (std::size_t s = 0; s < len; ++s) {
    if (steps[s].tape != &tape) throw Error(Errc::not_on_tape, "stack: operands live on different tapes");
    const Tensor& v = steps[s].value();
    if (v.shape() != first) shape_error(OpKind::stack, {first, v.shape()});
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * width, width, y.data() + (r * len + s) * width);
    }
    ids.push_back(steps[s].id);
  }
  auto inputs = ids;
  return tape.record(std::move(y), std::move(inputs), [ids = std::move(ids), rows, len, width](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    for (std::size_t s = 0; s < len; ++s) {
      if (!t.needs_grad(ids[s])) continue;
      Tensor& dx = t.grad(ids[s]);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* src = dy.data() + (r * len + s) * width;
        double* dst = dx.data() + r * width;
        for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
      }
    }
  });
}

Var batched_matvec(Var seq, Var query) {
  Tape& tape = same_tape(OpKind::batched_matvec, seq, query);
  const Tensor& a = seq.value();
  const Tensor& q = query.value();
  if (a.rank() != 3 || q.rank() != 2 || a.dim(0) != q.dim(0) || a.dim(2) != q.dim(1)) {
    shape_error(OpKind::batched_matvec, {a.shape(), q.shape()});
  }
  const std::size_t rows = a.dim(0), len = a.dim(1), width = a.dim(2);
  Tensor y({rows, len});
  for (std::size_t r = 0; r < rows; ++r) {
    const double* qr = q.data() + r * width;
    for (std::size_t s = 0; s < len; ++s) {
      const double* ar = a.data() + (r * len + s) * width;
      double acc = 0.0;
      for (std::size_t c = 0; c < width; ++c) acc += ar[c] * qr[c];
      y[r * len + s] = acc;
    }
  }
  const std::size_t ia = seq.id, iq = query.id;
  return tape.record(std::move(y), {ia, iq}, [ia, iq, rows, len, width](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    const bool ga = t.needs_grad(ia), gq = t.needs_grad(iq);
    const Tensor& av = t.value(ia);
    const Tensor& qv = t.value(iq);
    Tensor* da = ga ? &t.grad(ia) : nullptr;
    Tensor* dq = gq ? &t.grad(iq) : nullptr;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t s = 0; s < len; ++s) {
        const double g = dy[r * len + s];
        const std::size_t base = (r * len + s) * width;
        for (std::size_t c = 0; c < width; ++c) {
          if (da) (*da)[base + c] += g * qv[r * width + c];
          if (dq) (*dq)[r * width + c] += g * av[base + c];
        }
      }
    }
  });
}

Var weighted_sum(Var weights, Var seq) {
  Tape& tape = same_tape(OpKind::weighted_sum, weights, seq);
  const Tensor& w = weights.value();
  const Tensor& a = seq.value();
  if (a.rank() != 3 || w.rank() != 2 || a.dim(0) != w.dim(0) || a.dim(1) != w.dim(1)) {
    shape_error(OpKind::weighted_sum, {w.shape(), a.shape()});
  }
  const std::size_t rows = a.dim(0), len = a.dim(1), width = a.dim(2);
  Tensor y({rows, width});
  for (std::size_t r = 0; r < rows; ++r) {
    double* yr = y.data() + r * width;
    for (std::size_t s = 0; s < len; ++s) {
      const double ws = w[r * len + s];
      if (ws == 0.0) continue;
      const double* ar = a.data() + (r * len + s) * width;
      for (std::size_t c = 0; c < width; ++c) yr[c] += ws * ar[c];
    }
  }
  const std::size_t iw = weights.id, ia = seq.id;
  return tape.record(std::move(y), {iw, ia}, [iw, ia, rows, len, width](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    const bool gw = t.needs_grad(iw), ga = t.needs_grad(ia);
    const Tensor& wv = t.value(iw);
    const Tensor& av = t.value(ia);
    Tensor* dw = gw ? &t.grad(iw) : nullptr;
    Tensor* da = ga ? &t.grad(ia) : nullptr;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gr = dy.data() + r * width;
      for (std::size_t s = 0; s < len; ++s) {
        const std::size_t base = (r * len + s) * width;
        if (dw) {
          double acc = 0.0;
          for (std::size_t c = 0; c < width; ++c) acc += gr[c] * av[base + c];
          (*dw)[r * len + s] += acc;
        }
        if (da) {
          const double ws = wv[r * len + s];
          for (std::size_t c = 0; c < width; ++c) (*da)[base + c] += ws * gr[c];
        }
      }
    }
  });
}

Var blend_rows(std::span<const std::uint8_t> take_a, Var a, Var b) {
  Tape& tape = same_tape(OpKind::blend_rows, a, b);
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  if (x.shape() != z.shape() || take_a.size() != x.rows()) {
    shape_error(OpKind::blend_rows, {x.shape(), z.shape(), Shape{take_a.size()}});
  }
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const Tensor& src = take_a[r] ? x : z;
    std::copy_n(src.data() + r * cols, cols, y.data() + r * cols);
  }
  const std::size_t ia = a.id, ib = b.id;
  return tape.record(std::move(y), {ia, ib},
                     [ia, ib, rows, cols, sel = std::vector<std::uint8_t>(take_a.begin(), take_a.end())](Tape& t, std::size_t self) {
                       const Tensor& dy = t.grad(self);
                       const bool ga = t.needs_grad(ia), gb = t.needs_grad(ib);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const bool to_a = sel[r] != 0;
                         if (to_a ? !ga : !gb) continue;
                         Tensor& dst = t.grad(to_a ? ia : ib);
                         for (std::size_t c = 0; c < cols; ++c) dst[r * cols + c] += dy[r * cols + c];
                       }
                     });
}

}  // namespace mmt
