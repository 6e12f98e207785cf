#pragma once

#include <cmath>
#include <string>

#include "agriclip/encoders/params.hpp"
#include "agriclip/numerics/kernels.hpp"

namespace agriclip::distill {

template <typename T>
struct DinoLossResult {
  T loss = 0;
  Tensor<T> grad_student;     // (G+V) x K
  Tensor<T> teacher_probs;    // G x K, constant w.r.t. the student
};

// Teacher targets softmax((t - c) / tau_t) are constants. Student view s and
// teacher global view g contribute H(P_t^g, P_s^s) for every pair with s != g
// (student views 0..G-1 are the same crops as the teacher's); loss is the mean.
template <typename T>
DinoLossResult<T> dino_loss(const Tensor<T>& teacher_logits, const Tensor<T>& student_logits,
                            const Tensor<T>& center, T tau_t, T tau_s) {
  if (!(tau_t > T(0)) || !(tau_t < tau_s))
    throw ConfigError("dino_loss: temperatures must satisfy 0 < tau_t < tau_s");
  if (teacher_logits.rank() != 2 || student_logits.rank() != 2)
    throw ParameterError("dino_loss: logits must be matrices");
  const std::size_t g_views = teacher_logits.rows(), s_views = student_logits.rows(), k = teacher_logits.cols();
  if (student_logits.cols() != k || center.size() != k || s_views < g_views)
    throw ParameterError("dino_loss: inconsistent shapes teacher " + dims_string(teacher_logits.dims()) +
                         ", student " + dims_string(student_logits.dims()) + ", center " +
                         dims_string(center.dims()));

  Tensor<T> centred(teacher_logits.dims());
  for (std::size_t g = 0; g < g_views; ++g)
    for (std::size_t j = 0; j < k; ++j) centred(g, j) = teacher_logits(g, j) - center[j];
  DinoLossResult<T> r;
  r.teacher_probs = softmax_rows(centred, tau_t);
  const Tensor<T> log_ps = log_softmax_rows(student_logits, tau_s);
  const Tensor<T> ps = softmax_rows(student_logits, tau_s);

  std::size_t pairs = 0;
  T total = 0;
  r.grad_student = Tensor<T>(student_logits.dims());
  for (std::size_t s = 0; s < s_views; ++s) {
    for (std::size_t g = 0; g < g_views; ++g) {
      if (s == g) continue;
      ++pairs;
      for (std::size_t j = 0; j < k; ++j) {
        total -= r.teacher_probs(g, j) * log_ps(s, j);
        r.grad_student(s, j) += (ps(s, j) - r.teacher_probs(g, j)) / tau_s;
      }
    }
  }
  if (pairs == 0) throw ParameterError("dino_loss: no cross-view pairs");
  const T inv = T(1) / static_cast<T>(pairs);
  r.loss = total * inv;
  for (auto& v : r.grad_student.data()) v *= inv;
  return r;
}

// t <- m t + (1 - m) s for every tensor pair.
template <typename T>
void ema_update(std::span<Tensor<T>* const> teacher, std::span<const Tensor<T>* const> student, double momentum) {
  if (teacher.size() != student.size()) throw ParameterError("ema_update: tensor count mismatch");
  for (std::size_t i = 0; i < teacher.size(); ++i) require_same_shape(*teacher[i], *student[i], "ema_update");
  const T m = static_cast<T>(momentum), one_m = static_cast<T>(1.0 - momentum);
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    auto t = teacher[i]->data();
    auto s = student[i]->data();
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = m * t[j] + one_m * s[j];
  }
}

template <typename T>
void ema_update(Tensor<T>& teacher, const Tensor<T>& student, double momentum) {
  Tensor<T>* t[] = {&teacher};
  const Tensor<T>* s[] = {&student};
  ema_update<T>(std::span<Tensor<T>* const>(t), std::span<const Tensor<T>* const>(s), momentum);
}

// c <- rho c + (1 - rho) mean_rows(teacher_logits)
template <typename T>
void center_update(Tensor<T>& center, const Tensor<T>& teacher_logits, double rho) {
  if (teacher_logits.cols() != center.size()) throw ParameterError("center_update: dimension mismatch");
  const std::size_t n = teacher_logits.rows();
  for (std::size_t j = 0; j < center.size(); ++j) {
    T mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += teacher_logits(i, j);
    mean /= static_cast<T>(n);
    center[j] = static_cast<T>(rho) * center[j] + static_cast<T>(1.0 - rho) * mean;
  }
}

template <typename T>
T entropy(std::span<const T> p) {
  T h = 0;
  for (T v : p)
    if (v > T(0)) h -= v * std::log(v);
  return h;
}

}  // namespace agriclip::distill
