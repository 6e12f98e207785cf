#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>

#include "agriclip/numerics/tensor.hpp"

namespace agriclip {

inline constexpr double kNormEpsilon = 1e-12;

// Row-wise softmax of logits / temperature, max-subtracted.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits, T temperature) {
  if (!(temperature > T(0))) {
    throw ParameterError("softmax_rows: temperature must be positive, got " +
                         std::to_string(static_cast<double>(temperature)));
  }
  if (logits.rank() != 2) throw ParameterError("softmax_rows: expected a matrix");
  require_finite(logits, "softmax_rows");
  Tensor<T> out(logits.dims());
  const std::size_t rows = logits.rows(), cols = logits.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    T mx = logits(r, 0);
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, logits(r, c));
    T sum = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = std::exp((logits(r, c) - mx) / temperature);
      sum += out(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) out(r, c) /= sum;
  }
  return out;
}

// log of softmax_rows, computed without forming the probabilities first.
template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& logits, T temperature) {
  if (!(temperature > T(0))) throw ParameterError("log_softmax_rows: temperature must be positive");
  Tensor<T> out(logits.dims());
  const std::size_t rows = logits.rows(), cols = logits.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    T mx = logits(r, 0);
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, logits(r, c));
    T sum = 0;
    for (std::size_t c = 0; c < cols; ++c) sum += std::exp((logits(r, c) - mx) / temperature);
    const T lse = std::log(sum);
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = (logits(r, c) - mx) / temperature - lse;
  }
  return out;
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
T norm2(std::span<const T> v) {
  return std::sqrt(dot(v, v));
}

template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& v) {
  const T n = norm2(v.data());
  if (!(n > T(kNormEpsilon))) {
    throw DegenerateInputError("l2_normalize: vector norm " + std::to_string(static_cast<double>(n)) +
                               " is below epsilon");
  }
  Tensor<T> out(v.dims());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

// Given y = x/|x| and dL/dy, returns dL/dx.
template <typename T>
Tensor<T> l2_normalize_backward(const Tensor<T>& y, T input_norm, const Tensor<T>& grad_y) {
  const T proj = dot(y.data(), grad_y.data());
  Tensor<T> gx(y.dims());
  for (std::size_t i = 0; i < y.size(); ++i) gx[i] = (grad_y[i] - y[i] * proj) / input_norm;
  return gx;
}

// out[n] = sum_k x[k] * w[k, n]  (row vector times matrix)
template <typename T>
void vecmat(std::span<const T> x, const Tensor<T>& w, std::span<T> out) {
  const std::size_t in = w.rows(), n = w.cols();
  std::fill(out.begin(), out.end(), T(0));
  for (std::size_t k = 0; k < in; ++k) {
    const T xk = x[k];
    if (xk == T(0)) continue;
    const T* wr = &w.data()[k * n];
    for (std::size_t j = 0; j < n; ++j) out[j] += xk * wr[j];
  }
}

// out[k] = sum_n w[k, n] * g[n]  (matrix times column vector)
template <typename T>
void matvec(const Tensor<T>& w, std::span<const T> g, std::span<T> out) {
  const std::size_t in = w.rows(), n = w.cols();
  for (std::size_t k = 0; k < in; ++k) {
    const T* wr = &w.data()[k * n];
    T s = 0;
    for (std::size_t j = 0; j < n; ++j) s += wr[j] * g[j];
    out[k] = s;
  }
}

// gw[k, n] += x[k] * g[n]
template <typename T>
void add_outer(std::span<const T> x, std::span<const T> g, Tensor<T>& gw) {
  const std::size_t n = gw.cols();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const T xk = x[k];
    if (xk == T(0)) continue;
    T* gr = &gw.data()[k * n];
    for (std::size_t j = 0; j < n; ++j) gr[j] += xk * g[j];
  }
}

// C = A * B for matrices.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ParameterError("matmul: incompatible shapes " + dims_string(a.dims()) + " and " +
                         dims_string(b.dims()));
  }
  Tensor<T> c({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i) vecmat<T>(a.row(i), b, c.row(i));
  return c;
}

// C = A * B^T.
template <typename T>
Tensor<T> matmul_transposed(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw ParameterError("matmul_transposed: incompatible shapes " + dims_string(a.dims()) + " and " +
                         dims_string(b.dims()));
  }
  Tensor<T> c({a.rows(), b.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
  return c;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  Tensor<T> t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

template <typename T>
std::size_t argmax(std::span<const T> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace agriclip
