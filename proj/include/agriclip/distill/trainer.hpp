#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "agriclip/contrastive/trainer.hpp"
#include "agriclip/corpus/dataset.hpp"
#include "agriclip/distill/dino_loss.hpp"
#include "agriclip/distill/multi_crop.hpp"
#include "agriclip/encoders/encoder.hpp"
#include "agriclip/numerics/adamw.hpp"

namespace agriclip::distill {

struct DistillConfig {
  CropConfig crops;
  double student_temperature = 0.1;
  double teacher_temperature = 0.04;
  double ema_momentum = 0.996;
  double center_momentum = 0.9;
  std::size_t prototypes = 32;  // K
  bool unit_prototypes = false;  // weight-normalised head columns
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double lr = 5e-4;
  double weight_decay = 0.04;
  std::uint64_t seed = 0;
};

inline void validate(const DistillConfig& c) {
  auto in_unit = [](ScaleRange r) { return r.lo > 0.0 && r.lo <= r.hi && r.hi <= 1.0; };
  if (!in_unit(c.crops.global_scale) || !in_unit(c.crops.local_scale))
    throw ConfigError("crop scale ranges must lie within (0, 1]");
  if (c.crops.global_crops < 1) throw ConfigError("need at least one global crop");
  if (c.crops.global_crops + c.crops.local_crops < 2) throw ConfigError("need at least two views");
  if (!(c.teacher_temperature > 0.0 && c.teacher_temperature < c.student_temperature))
    throw ConfigError("distill temperatures must satisfy 0 < tau_t < tau_s");
  if (!(c.ema_momentum >= 0.0 && c.ema_momentum < 1.0)) throw ConfigError("EMA momentum must lie in [0, 1)");
  if (!(c.center_momentum >= 0.0 && c.center_momentum < 1.0))
    throw ConfigError("center momentum must lie in [0, 1)");
  if (c.prototypes < 2) throw ConfigError("need at least two prototypes");
  if (c.batch_size < 1) throw ConfigError("distill batch size must be positive");
  if (!(c.lr > 0.0) || c.weight_decay < 0.0) throw ConfigError("distill lr must be positive, weight decay >= 0");
}

// Backbone plus the linear projection head onto K prototypes. With
// unit_prototypes each head column is used as v / ||v|| (weight norm with the
// gain fixed at 1), so logits are cosines in [-1, 1].
template <typename T>
struct DinoModel {
  encoders::EncoderParams<T> backbone;
  Tensor<T> head;  // d_out x K
  bool unit_prototypes = false;

  std::vector<Tensor<T>*> tensors() {
    auto out = backbone.tensors();
    out.push_back(&head);
    return out;
  }
  std::vector<const Tensor<T>*> tensors() const {
    auto out = backbone.tensors();
    out.push_back(&head);
    return out;
  }
  friend bool operator==(const DinoModel&, const DinoModel&) = default;
};

template <typename T>
DinoModel<T> init_dino_model(const encoders::EncoderConfig& config, std::size_t prototypes,
                             bool unit_prototypes = false) {
  DinoModel<T> m{encoders::init_params<T>(config), Tensor<T>({config.d_out, prototypes}), unit_prototypes};
  Rng rng(derive_seed(config.init_seed, "head"));
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.d_out));
  for (auto& v : m.head.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return m;
}

template <typename T>
struct ViewForward {
  encoders::Activations<T> act;
  std::vector<T> logits;
  std::vector<T> column_norms;  // empty unless unit_prototypes
};

template <typename T>
std::vector<T> head_column_norms(const Tensor<T>& head) {
  std::vector<T> n(head.cols(), T(0));
  for (std::size_t i = 0; i < head.rows(); ++i)
    for (std::size_t k = 0; k < head.cols(); ++k) n[k] += head(i, k) * head(i, k);
  for (auto& v : n) {
    v = std::sqrt(v);
    if (!(v > T(kNormEpsilon))) throw DegenerateInputError("prototype column with zero norm");
  }
  return n;
}

template <typename T, typename Pixel>
ViewForward<T> dino_forward(const DinoModel<T>& model, const Tensor<Pixel>& pixels) {
  ViewForward<T> f{encoders::image_forward<T>(model.backbone, pixels), {}, {}};
  f.logits.assign(model.head.cols(), T(0));
  vecmat<T>(f.act.out.data(), model.head, f.logits);
  if (model.unit_prototypes) {
    f.column_norms = head_column_norms(model.head);
    for (std::size_t k = 0; k < f.logits.size(); ++k) f.logits[k] /= f.column_norms[k];
  }
  return f;
}

template <typename T>
void dino_backward(const DinoModel<T>& model, const ViewForward<T>& f, std::span<const T> grad_logits,
                   DinoModel<T>& grads) {
  const std::size_t d = model.head.rows(), k = model.head.cols();
  const auto z = f.act.out.data();
  Tensor<T> d_z({d});
  if (!model.unit_prototypes) {
    add_outer<T>(z, grad_logits, grads.head);
    matvec<T>(model.head, grad_logits, d_z.data());
  } else {
    // l_k = z . v_k / n_k:  dl_k/dv_k = (z - l_k v_k / n_k) / n_k,  dl_k/dz = v_k / n_k.
    for (std::size_t j = 0; j < k; ++j) {
      const T g = grad_logits[j] / f.column_norms[j];
      if (g == T(0)) continue;
      const T l = f.logits[j];
      for (std::size_t i = 0; i < d; ++i) {
        const T u = model.head(i, j) / f.column_norms[j];
        grads.head(i, j) += g * (z[i] - l * u);
        d_z[i] += g * model.head(i, j);
      }
    }
  }
  encoders::image_backward(model.backbone, f.act, d_z, grads.backbone);
}

struct DistillEpoch {
  double mean_loss = 0;
  double teacher_entropy = 0;  // mean entropy of teacher probabilities
};

struct DistillResult {
  DinoModel<float> student;
  DinoModel<float> teacher;
  Tensor<float> center;
  std::vector<DistillEpoch> history;
};

inline DistillResult train_distill(const corpus::LoadedSplit& train, const DistillConfig& config,
                                   const encoders::EncoderConfig& encoder_config) {
  validate(config);
  if (train.size() == 0) throw ConfigError("train_distill: empty training split");
  DistillResult res{init_dino_model<float>(encoder_config, config.prototypes, config.unit_prototypes), {},
                    Tensor<float>({config.prototypes}), {}};
  res.teacher = res.student;
  CropConfig crops = config.crops;
  crops.out_height = encoder_config.image_height;
  crops.out_width = encoder_config.image_width;

  OptimState<float> opt;
  opt.hyper.lr = config.lr;
  opt.hyper.weight_decay = config.weight_decay;
  Rng rng(config.seed);
  const auto tau_t = static_cast<float>(config.teacher_temperature);
  const auto tau_s = static_cast<float>(config.student_temperature);
  const std::size_t g_views = crops.global_crops, k = config.prototypes;
  auto student_params = res.student.tensors();

  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0, entropy_sum = 0;
    std::size_t loss_count = 0, entropy_count = 0;
    for (const auto& batch : contrastive::epoch_batches(train.size(), config.batch_size, rng)) {
      ++step;
      DinoModel<float> grads{encoders::zeros_like(res.student.backbone), Tensor<float>(res.student.head.dims()),
                             res.student.unit_prototypes};
      Tensor<float> batch_teacher({batch.size() * g_views, k});
      double batch_loss = 0;
      const float inv_batch = 1.0f / static_cast<float>(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto views = multi_crop(train.images[batch[b]], crops, rng);
        Tensor<float> t_logits({g_views, k}), s_logits({views.size(), k});
        std::vector<ViewForward<float>> s_fwd;
        s_fwd.reserve(views.size());
        for (std::size_t v = 0; v < views.size(); ++v) {
          s_fwd.push_back(dino_forward(res.student, views[v].pixels));
          std::copy(s_fwd.back().logits.begin(), s_fwd.back().logits.end(), s_logits.row(v).begin());
        }
        for (std::size_t g = 0; g < g_views; ++g) {
          const auto t = dino_forward(res.teacher, views[g].pixels);
          std::copy(t.logits.begin(), t.logits.end(), t_logits.row(g).begin());
          std::copy(t.logits.begin(), t.logits.end(), batch_teacher.row(b * g_views + g).begin());
        }
        const auto loss = dino_loss(t_logits, s_logits, res.center, tau_t, tau_s);
        if (!std::isfinite(loss.loss))
          throw TrainingError("distillation diverged at step " + std::to_string(step));
        batch_loss += loss.loss;
        for (std::size_t g = 0; g < g_views; ++g) {
          entropy_sum += entropy<float>(loss.teacher_probs.row(g));
          ++entropy_count;
        }
        std::vector<float> gl(k);
        for (std::size_t v = 0; v < views.size(); ++v) {
          for (std::size_t j = 0; j < k; ++j) gl[j] = loss.grad_student(v, j) * inv_batch;
          dino_backward<float>(res.student, s_fwd[v], gl, grads);
        }
      }
      adamw_step<float>(student_params, std::as_const(grads).tensors(), opt);
      ema_update<float>(res.teacher.tensors(), std::as_const(res.student).tensors(), config.ema_momentum);
      center_update(res.center, batch_teacher, config.center_momentum);
      loss_sum += batch_loss / static_cast<double>(batch.size());
      ++loss_count;
    }
    res.history.push_back({loss_sum / double(loss_count), entropy_sum / double(entropy_count)});
  }
  return res;
}

}  // namespace agriclip::distill
