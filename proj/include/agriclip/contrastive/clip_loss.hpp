#pragma once

#include <cmath>
#include <string>

#include "agriclip/numerics/kernels.hpp"

namespace agriclip::contrastive {

template <typename T>
struct ClipLossResult {
  T loss = 0;
  Tensor<T> grad_u;  // N x d
  Tensor<T> grad_v;  // N x d
};

namespace detail {

// In-batch InfoNCE over S = U V^T / tau; row i of U pairs with row i of V.
// image->text: -log softmax_k(S[i, k])[i]; text->image uses columns.
template <typename T>
ClipLossResult<T> clip_loss_unchecked(const Tensor<T>& u, const Tensor<T>& v, T tau, bool symmetric) {
  const std::size_t n = u.rows();
  const Tensor<T> s = matmul_transposed(u, v);
  const Tensor<T> p_rows = softmax_rows(s, tau);
  const Tensor<T> log_rows = log_softmax_rows(s, tau);

  Tensor<T> d_s({n, n});  // dL/d(sim), before the 1/tau factor
  T i2t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    i2t -= log_rows(i, i);
    for (std::size_t k = 0; k < n; ++k) d_s(i, k) = p_rows(i, k) - (i == k ? T(1) : T(0));
  }
  i2t /= static_cast<T>(n);

  T loss = i2t;
  T row_weight = T(1) / static_cast<T>(n);
  if (symmetric) {
    const Tensor<T> st = transpose(s);
    const Tensor<T> p_cols = softmax_rows(st, tau);
    const Tensor<T> log_cols = log_softmax_rows(st, tau);
    T t2i = 0;
    for (std::size_t j = 0; j < n; ++j) t2i -= log_cols(j, j);
    t2i /= static_cast<T>(n);
    loss = T(0.5) * (i2t + t2i);
    row_weight = T(0.5) / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) d_s(i, k) += p_cols(k, i) - (i == k ? T(1) : T(0));
  }
  const T scale = row_weight / tau;
  for (auto& x : d_s.data()) x *= scale;

  ClipLossResult<T> r;
  r.loss = loss;
  r.grad_u = matmul(d_s, v);
  r.grad_v = matmul(transpose(d_s), u);
  return r;
}

}  // namespace detail

// Contrastive loss of a batch of unit-norm image (U) and text (V) embeddings.
// symmetric = average of the image->text and text->image directions.
template <typename T>
ClipLossResult<T> clip_loss(const Tensor<T>& u, const Tensor<T>& v, T tau, bool symmetric = true) {
  if (u.rank() != 2 || !u.same_shape(v)) throw ParameterError("clip_loss: U and V must be matching N x d matrices");
  if (u.rows() < 2) throw ParameterError("clip_loss: need at least two pairs");
  if (!(tau > T(0))) throw ParameterError("clip_loss: temperature must be positive");
  for (const Tensor<T>* m : {&u, &v})
    for (std::size_t i = 0; i < m->rows(); ++i) {
      const double nrm = static_cast<double>(norm2<T>(m->row(i)));
      if (std::abs(nrm - 1.0) > 1e-6)
        throw PreconditionError("clip_loss: row " + std::to_string(i) + " has norm " + std::to_string(nrm) +
                                "; normalise embeddings first");
    }
  return detail::clip_loss_unchecked(u, v, tau, symmetric);
}

}  // namespace agriclip::contrastive
