// Copyright 2026 The RKT Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rkt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rkt/error.hpp"
#include "rkt/rng.hpp"

namespace rkt::num {
namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw NumericError(std::string(op) + ": incompatible shapes " +
                     shape_string(a) + " and " + shape_string(b));
}

void require_same_tape(const char* op, Var a, Var b) {
  if (&a.tape() != &b.tape()) {
    throw NumericError(std::string(op) + ": operands live on different tapes");
  }
}

void require_matrix(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    throw NumericError(std::string(op) + ": expected a matrix, got shape " +
                       shape_string(t.shape()));
  }
}

enum class Broadcast { kSame, kScalar, kRow };

Broadcast classify(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.size() == 1) return Broadcast::kScalar;
  if (b.rank() == 1 && b.dim(0) == a.cols()) return Broadcast::kRow;
  shape_error(op, a.shape(), b.shape());
}

// Index into b for element i of a under the given broadcast.
inline std::size_t bidx(Broadcast kind, std::size_t i, std::size_t cols) {
  switch (kind) {
    case Broadcast::kSame:
      return i;
    case Broadcast::kScalar:
      return 0;
    case Broadcast::kRow:
      return i % cols;
  }
  return i;
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_matrix("matmul", A);
  require_matrix("matmul", B);
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  if (B.dim(0) != k) shape_error("matmul", A.shape(), B.shape());

  Tensor C({m, n}, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = C.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }

  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(C), {ia, ib}, [=](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& A = t.value(ia);
    const Tensor& B = t.value(ib);
    if (t.needs_grad(ia)) {
      Tensor& gA = t.grad(ia);
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B.data() + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          gA[i * k + p] += acc;
        }
      }
    }
    if (t.needs_grad(ib)) {
      Tensor& gB = t.grad(ib);
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          double* gbrow = gB.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  require_matrix("transpose", A);
  const std::size_t m = A.dim(0), n = A.dim(1);
  Tensor T({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) T[j * m + i] = A[i * n + j];
  const std::size_t ia = a.id();
  return a.tape().record(std::move(T), {ia}, [=](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    Tensor& gA = t.grad(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gA[i * n + j] += G[j * m + i];
  });
}

Var add(Var a, Var b) {
  require_same_tape("add", a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const Broadcast kind = classify("add", A, B);
  const std::size_t cols = A.cols();
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] += B[bidx(kind, i, cols)];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(C), {ia, ib}, [=](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor& gA = t.grad(ia);
      for (std::size_t i = 0; i < G.size(); ++i) gA[i] += G[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gB = t.grad(ib);
      for (std::size_t i = 0; i < G.size(); ++i) gB[bidx(kind, i, cols)] += G[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_tape("mul", a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const Broadcast kind = classify("mul", A, B);
  const std::size_t cols = A.cols();
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[bidx(kind, i, cols)];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(C), {ia, ib}, [=](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& A = t.value(ia);
    const Tensor& B = t.value(ib);
    if (t.needs_grad(ia)) {
      Tensor& gA = t.grad(ia);
      for (std::size_t i = 0; i < G.size(); ++i) gA[i] += G[i] * B[bidx(kind, i, cols)];
    }
    if (t.needs_grad(ib)) {
      Tensor& gB = t.grad(ib);
      for (std::size_t i = 0; i < G.size(); ++i) gB[bidx(kind, i, cols)] += G[i] * A[i];
    }
  });
}

Var concat(Var a, Var b) {
  require_same_tape("concat", a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != B.rank() || A.rows() != B.rows()) {
    shape_error("concat", A.shape(), B.shape());
  }
  for (std::size_t ax = 0; ax + 1 < A.rank(); ++ax) {
    if (A.dim(ax) != B.dim(ax)) shape_error("concat", A.shape(), B.shape());
  }
  const std::size_t rows = A.rows(), p = A.cols(), q = B.cols();
  Shape shape = A.shape();
  shape.back() = p + q;
  Tensor C(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(A.data() + r * p, p, C.data() + r * (p + q));
    std::copy_n(B.data() + r * q, q, C.data() + r * (p + q) + p);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(C), {ia, ib}, [=](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    for (std::size_t r = 0; r < rows; ++r) {
      if (t.needs_grad(ia)) {
        Tensor& gA = t.grad(ia);
        for (std::size_t c = 0; c < p; ++c) gA[r * p + c] += G[r * (p + q) + c];
      }
      if (t.needs_grad(ib)) {
        Tensor& gB = t.grad(ib);
        for (std::size_t c = 0; c < q; ++c) gB[r * q + c] += G[r * (p + q) + p + c];
      }
    }
  });
}

Var masked_softmax(Var x, std::vector<std::uint8_t> mask) {
  const Tensor& X = x.value();
  if (mask.size() != X.size()) {
    throw NumericError("masked_softmax: mask size " + std::to_string(mask.size()) +
                       " does not match input shape " + shape_string(X.shape()));
  }
  const std::size_t rows = X.rows(), cols = X.cols();
  Tensor Y(X.shape(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t off = r * cols;
    double mx = -INFINITY;
    for (std::size_t c = 0; c < cols; ++c)
      if (mask[off + c]) mx = std::max(mx, X[off + c]);
    if (mx == -INFINITY) continue;
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!mask[off + c]) continue;
      const double e = std::exp(X[off + c] - mx);
      Y[off + c] = e;
      z += e;
    }
    for (std::size_t c = 0; c < cols; ++c)
      if (mask[off + c]) Y[off + c] /= z;
  }
  const std::size_t ix = x.id();
  const std::size_t out = x.tape().size();
  return x.tape().record(std::move(Y), {ix}, [=, mask = std::move(mask)](
                                                 Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& Y = t.value(out);
    Tensor& gX = t.grad(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t off = r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c)
        if (mask[off + c]) dot += Y[off + c] * G[off + c];
      for (std::size_t c = 0; c < cols; ++c)
        if (mask[off + c]) gX[off + c] += Y[off + c] * (G[off + c] - dot);
    }
  });
}

Var relu(Var x) {
  Tensor Y = x.value();
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = Y[i] > 0.0 ? Y[i] : 0.0;
  const std::size_t ix = x.id();
  return x.tape().record(std::move(Y), {ix}, [=](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& X = t.value(ix);
    Tensor& gX = t.grad(ix);
    for (std::size_t i = 0; i < G.size(); ++i)
      if (X[i] > 0.0) gX[i] += G[i];
  });
}

Var sigmoid(Var x) {
  Tensor Y = x.value();
  for (std::size_t i = 0; i < Y.size(); ++i) {
    const double v = Y[i];
    Y[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  const std::size_t ix = x.id();
  const std::size_t out = x.tape().size();
  return x.tape().record(std::move(Y), {ix}, [=](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& Y = t.value(out);
    Tensor& gX = t.grad(ix);
    for (std::size_t i = 0; i < G.size(); ++i) gX[i] += G[i] * Y[i] * (1.0 - Y[i]);
  });
}

Var exp(Var x) {
  Tensor Y = x.value();
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = std::exp(Y[i]);
  const std::size_t ix = x.id();
  const std::size_t out = x.tape().size();
  return x.tape().record(std::move(Y), {ix}, [=](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const Tensor& Y = t.value(out);
    Tensor& gX = t.grad(ix);
    for (std::size_t i = 0; i < G.size(); ++i) gX[i] += G[i] * Y[i];
  });
}

Var scale(Var x, double c) {
  Tensor Y = x.value();
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] *= c;
  const std::size_t ix = x.id();
  return x.tape().record(std::move(Y), {ix}, [=](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    Tensor& gX = t.grad(ix);
    for (std::size_t i = 0; i < G.size(); ++i) gX[i] += c * G[i];
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_same_tape("layer_norm", x, gain);
  require_same_tape("layer_norm", x, bias);
  const Tensor& X = x.value();
  const std::size_t rows = X.rows(), cols = X.cols();
  if (gain.value().size() != cols || bias.value().size() != cols) {
    shape_error("layer_norm", X.shape(), gain.value().shape());
  }
  const Tensor& g = gain.value();
  const Tensor& b = bias.value();

  // Normalized values and per-row inverse std are kept for the reverse pass.
  Tensor xhat(X.shape());
  std::vector<double> inv_std(rows);
  Tensor Y(X.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = X.data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += row[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (row[c] - mu) * is;
      xhat[r * cols + c] = h;
      Y[r * cols + c] = h * g[c] + b[c];
    }
  }

  const std::size_t ix = x.id(), ig = gain.id(), ibias = bias.id();
  return x.tape().record(
      std::move(Y), {ix, ig, ibias},
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t,
                                                                std::size_t self) {
        const Tensor& G = t.grad(self);
        const Tensor& g = t.value(ig);
        if (t.needs_grad(ig)) {
          Tensor& gg = t.grad(ig);
          for (std::size_t i = 0; i < G.size(); ++i) gg[i % cols] += G[i] * xhat[i];
        }
        if (t.needs_grad(ibias)) {
          Tensor& gb = t.grad(ibias);
          for (std::size_t i = 0; i < G.size(); ++i) gb[i % cols] += G[i];
        }
        if (t.needs_grad(ix)) {
          Tensor& gX = t.grad(ix);
          const double n = static_cast<double>(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t off = r * cols;
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              const double d = G[off + c] * g[c];
              mean_d += d;
              mean_dx += d * xhat[off + c];
            }
            mean_d /= n;
            mean_dx /= n;
            for (std::size_t c = 0; c < cols; ++c) {
              const double d = G[off + c] * g[c];
              gX[off + c] += inv_std[r] * (d - mean_d - xhat[off + c] * mean_dx);
            }
          }
        }
      });
}

Var dropout(Var x, double rate, std::uint64_t seed, bool train) {
  if (rate < 0.0 || rate >= 1.0) {
    throw NumericError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!train || rate == 0.0) return x;
  const Tensor& X = x.value();
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> factor(X.size());
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) {
    factor[i] = to_unit(hash_combine(seed, i)) >= rate ? keep_scale : 0.0;
    Y[i] = X[i] * factor[i];
  }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(Y), {ix},
                         [=, factor = std::move(factor)](Tape& t, std::size_t self) {
                           const Tensor& G = t.grad(self);
                           Tensor& gX = t.grad(ix);
                           for (std::size_t i = 0; i < G.size(); ++i)
                             gX[i] += G[i] * factor[i];
                         });
}

Var embedding(Var table, std::span<const std::size_t> ids) {
  const Tensor& T = table.value();
  require_matrix("embedding", T);
  const std::size_t vocab = T.dim(0), n = T.dim(1);
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  Tensor Y({rows.size(), n});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= vocab) {
      throw NumericError("embedding: row " + std::to_string(rows[r]) +
                         " out of range for table " + shape_string(T.shape()));
    }
    std::copy_n(T.data() + rows[r] * n, n, Y.data() + r * n);
  }
  const std::size_t it = table.id();
  return table.tape().record(std::move(Y), {it},
                             [=, rows = std::move(rows)](Tape& t, std::size_t self) {
                               const Tensor& G = t.grad(self);
                               Tensor& gT = t.grad(it);
                               for (std::size_t r = 0; r < rows.size(); ++r)
                                 for (std::size_t c = 0; c < n; ++c)
                                   gT[rows[r] * n + c] += G[r * n + c];
                             });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const std::size_t ix = x.id();
  return x.tape().record(Tensor::scalar(s), {ix}, [=](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& gX = t.grad(ix);
    for (std::size_t i = 0; i < gX.size(); ++i) gX[i] += g;
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  return scale(sum(x), 1.0 / n);
}

Var binary_cross_entropy_with_logits(Var logits, std::vector<double> labels,
                                     std::vector<double> weights) {
  const Tensor& Z = logits.value();
  if (labels.size() != Z.size() || weights.size() != Z.size()) {
    throw NumericError("binary_cross_entropy_with_logits: " +
                       std::to_string(labels.size()) + " labels and " +
                       std::to_string(weights.size()) + " weights for logits " +
                       shape_string(Z.shape()));
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < Z.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const double z = Z[i];
    const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    loss += weights[i] * (softplus - labels[i] * z);
  }
  const std::size_t iz = logits.id();
  return logits.tape().record(
      Tensor::scalar(loss), {iz},
      [=, labels = std::move(labels), weights = std::move(weights)](Tape& t,
                                                                    std::size_t self) {
        const double g = t.grad(self)[0];
        const Tensor& Z = t.value(iz);
        Tensor& gZ = t.grad(iz);
        for (std::size_t i = 0; i < Z.size(); ++i) {
          if (weights[i] == 0.0) continue;
          const double z = Z[i];
          const double s =
              z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
          gZ[i] += g * weights[i] * (s - labels[i]);
        }
      });
}

}  // namespace rkt::num
