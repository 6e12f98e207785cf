#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "agriclip/numerics/tensor.hpp"

namespace agriclip {

struct AdamWHyper {
  double lr = 5e-4;
  double weight_decay = 0.04;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moments for one parameter tensor.
template <typename T>
struct AdamMoments {
  Tensor<T> first;
  Tensor<T> second;
};

template <typename T>
struct OptimState {
  AdamWHyper hyper;
  std::vector<AdamMoments<T>> moments;  // one entry per parameter tensor, visit order
  std::uint64_t step = 0;
};

namespace detail {

template <typename T>
void adamw_update(Tensor<T>& params, const Tensor<T>& grads, AdamMoments<T>& m,
                  const AdamWHyper& h, std::uint64_t step) {
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
  const T decay = static_cast<T>(1.0 - h.lr * h.weight_decay);
  const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
  auto p = params.data();
  auto g = grads.data();
  auto m1 = m.first.data();
  auto m2 = m.second.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m1[i] = b1 * m1[i] + (T(1) - b1) * g[i];
    m2[i] = b2 * m2[i] + (T(1) - b2) * g[i] * g[i];
    const double mhat = static_cast<double>(m1[i]) / bc1;
    const double vhat = static_cast<double>(m2[i]) / bc2;
    p[i] = p[i] * decay - static_cast<T>(h.lr * mhat / (std::sqrt(vhat) + h.eps));
  }
}

}  // namespace detail

// One AdamW step over a list of parameter tensors. Decoupled decay is applied
// as theta <- theta * (1 - lr * wd) followed by the bias-corrected adaptive step.
template <typename T>
void adamw_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads,
                OptimState<T>& state) {
  if (params.size() != grads.size()) throw ParameterError("adamw_step: params/grads count mismatch");
  if (state.moments.empty()) {
    for (auto* p : params) state.moments.push_back({Tensor<T>(p->dims()), Tensor<T>(p->dims())});
  }
  if (state.moments.size() != params.size())
    throw ParameterError("adamw_step: optimizer state tracks a different parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i], *grads[i], "adamw_step");
    require_same_shape(*params[i], state.moments[i].first, "adamw_step state");
  }
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i)
    detail::adamw_update(*params[i], *grads[i], state.moments[i], state.hyper, state.step);
}

template <typename T>
void adamw_step(Tensor<T>& params, const Tensor<T>& grads, OptimState<T>& state) {
  Tensor<T>* p[] = {&params};
  const Tensor<T>* g[] = {&grads};
  adamw_step<T>(std::span<Tensor<T>* const>(p), std::span<const Tensor<T>* const>(g), state);
}

}  // namespace agriclip
