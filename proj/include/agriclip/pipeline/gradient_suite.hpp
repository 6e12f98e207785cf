#pragma once

#include <string>
#include <vector>

#include "agriclip/align/affine.hpp"
#include "agriclip/contrastive/clip_loss.hpp"
#include "agriclip/distill/dino_loss.hpp"
#include "agriclip/distill/trainer.hpp"
#include "agriclip/encoders/encoder.hpp"
#include "agriclip/numerics/gradcheck.hpp"

namespace agriclip::pipeline {

struct GradCase {
  std::string name;
  std::uint64_t seed = 0;
  GradCheckReport report;
};

namespace grad_detail {

inline Tensor<double> random_tensor(Dims dims, Rng& rng, double scale = 1.0) {
  Tensor<double> t(std::move(dims));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

inline Tensor<double> random_image(std::size_t h, std::size_t w, Rng& rng) {
  Tensor<double> t({h, w, 3});
  for (auto& v : t.data()) v = rng.uniform();
  return t;
}

inline Tensor<double> concat(const std::vector<const Tensor<double>*>& parts) {
  std::vector<double> flat;
  for (const auto* p : parts) flat.insert(flat.end(), p->data().begin(), p->data().end());
  const std::size_t n = flat.size();
  return Tensor<double>({n}, std::move(flat));
}

// Row-normalises raw, returning the unit rows and the norms.
inline Tensor<double> unit_rows(const Tensor<double>& raw, std::vector<double>& norms) {
  Tensor<double> out(raw.dims());
  norms.assign(raw.rows(), 0.0);
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    norms[i] = norm2<double>(raw.row(i));
    for (std::size_t j = 0; j < raw.cols(); ++j) out(i, j) = raw(i, j) / norms[i];
  }
  return out;
}

inline void unit_rows_backward(const Tensor<double>& unit, const std::vector<double>& norms, const Tensor<double>& g,
                               std::span<double> out) {
  for (std::size_t i = 0; i < unit.rows(); ++i) {
    Tensor<double> y({unit.cols()}), gy({unit.cols()});
    std::copy(unit.row(i).begin(), unit.row(i).end(), y.data().begin());
    std::copy(g.row(i).begin(), g.row(i).end(), gy.data().begin());
    const auto gx = l2_normalize_backward(y, norms[i], gy);
    std::copy(gx.data().begin(), gx.data().end(), out.begin() + static_cast<std::ptrdiff_t>(i * unit.cols()));
  }
}

// Generic parameter point: every entry (biases included) ~ N(0, scale^2).
// Freshly initialised tiny encoders emit raw outputs of norm ~1e-2, where the
// normalisation's curvature swamps a central difference at h = 1e-5.
template <typename P>
void randomize(P& params, Rng& rng, double scale = 0.5) {
  for (auto* t : params.tensors())
    for (auto& v : t->data()) v = scale * rng.normal();
}

inline encoders::EncoderConfig tiny_image_config(std::uint64_t seed) {
  encoders::EncoderConfig c;
  c.kind = encoders::EncoderKind::Image;
  c.image_height = c.image_width = 16;
  c.patch_size = 8;
  c.d_model = 6;
  c.hidden = 10;
  c.d_out = 8;
  c.init_seed = seed;
  return c;
}

inline encoders::EncoderConfig tiny_text_config(std::uint64_t seed) {
  encoders::EncoderConfig c;
  c.kind = encoders::EncoderKind::Text;
  c.vocab_size = 9;
  c.d_model = 6;
  c.hidden = 10;
  c.d_out = 8;
  c.init_seed = seed;
  return c;
}

}  // namespace grad_detail

// clip_loss composed with row normalisation, w.r.t. the raw U and V.
inline GradCase check_clip_gradient(std::uint64_t seed, bool symmetric, double tau = 0.07) {
  using namespace grad_detail;
  Rng rng(derive_seed(seed, "clip", symmetric ? 1 : 0));
  const std::size_t n = 4, d = 6;
  const auto u = random_tensor({n, d}, rng), v = random_tensor({n, d}, rng);
  LossFn fn = [&](const Tensor<double>& p, Tensor<double>* grad) {
    Tensor<double> ur({n, d}, std::vector<double>(p.data().begin(), p.data().begin() + n * d));
    Tensor<double> vr({n, d}, std::vector<double>(p.data().begin() + n * d, p.data().end()));
    std::vector<double> nu, nv;
    const auto uu = unit_rows(ur, nu), vv = unit_rows(vr, nv);
    const auto r = contrastive::clip_loss(uu, vv, tau, symmetric);
    if (grad) {
      unit_rows_backward(uu, nu, r.grad_u, grad->data().subspan(0, n * d));
      unit_rows_backward(vv, nv, r.grad_v, grad->data().subspan(n * d));
    }
    return r.loss;
  };
  return {symmetric ? "clip_loss/symmetric" : "clip_loss/one_way", seed,
          finite_diff_check(fn, concat({&u, &v}))};
}

// dino_loss w.r.t. the student backbone and head; teacher logits and center fixed.
inline GradCase check_dino_gradient(std::uint64_t seed, bool unit_prototypes = false) {
  using namespace grad_detail;
  Rng rng(derive_seed(seed, "dino"));
  const std::size_t k = 5, g_views = 2, views = 4;
  auto model = distill::init_dino_model<double>(tiny_image_config(derive_seed(seed, "init")), k, unit_prototypes);
  randomize(model, rng);
  std::vector<Tensor<double>> images;
  for (std::size_t i = 0; i < views; ++i) images.push_back(random_image(16, 16, rng));
  const auto teacher = random_tensor({g_views, k}, rng, 0.2);
  const auto center = random_tensor({k}, rng, 0.05);
  const std::size_t nb = model.backbone.parameter_count();

  LossFn fn = [&](const Tensor<double>& p, Tensor<double>* grad) {
    auto m = model;
    encoders::unflatten<double>(p.data().subspan(0, nb), m.backbone);
    std::copy(p.data().begin() + static_cast<std::ptrdiff_t>(nb), p.data().end(), m.head.data().begin());
    Tensor<double> logits({views, k});
    std::vector<distill::ViewForward<double>> fwd;
    for (std::size_t v = 0; v < views; ++v) {
      fwd.push_back(distill::dino_forward(m, images[v]));
      std::copy(fwd.back().logits.begin(), fwd.back().logits.end(), logits.row(v).begin());
    }
    const auto r = distill::dino_loss(teacher, logits, center, 0.04, 0.1);
    if (grad) {
      distill::DinoModel<double> g{encoders::zeros_like(m.backbone), Tensor<double>(m.head.dims()), unit_prototypes};
      for (std::size_t v = 0; v < views; ++v) distill::dino_backward<double>(m, fwd[v], r.grad_student.row(v), g);
      const auto flat = encoders::flatten(g.backbone);
      std::copy(flat.data().begin(), flat.data().end(), grad->data().begin());
      std::copy(g.head.data().begin(), g.head.data().end(), grad->data().begin() + static_cast<std::ptrdiff_t>(nb));
    }
    return r.loss;
  };
  const auto flat = encoders::flatten(model.backbone);
  return {unit_prototypes ? "dino_loss/unit_protos" : "dino_loss/student", seed, finite_diff_check(fn, concat({&flat, &model.head}))};
}

// Ridge objective w.r.t. W and b.
inline GradCase check_affine_gradient(std::uint64_t seed, double lambda = 1e-3) {
  using namespace grad_detail;
  Rng rng(derive_seed(seed, "affine"));
  const std::size_t n = 12, ds = 4, dc = 3;
  const auto x = random_tensor({n, ds}, rng), y = random_tensor({n, dc}, rng);
  const auto w = random_tensor({ds, dc}, rng), b = random_tensor({dc}, rng);
  LossFn fn = [&](const Tensor<double>& p, Tensor<double>* grad) {
    Tensor<double> pw({ds, dc}, std::vector<double>(p.data().begin(), p.data().begin() + ds * dc));
    Tensor<double> pb({dc}, std::vector<double>(p.data().begin() + ds * dc, p.data().end()));
    if (grad) {
      const auto g = align::affine_objective_gradient(x, y, pw, pb, lambda);
      *grad = concat({&g.weight, &g.bias});
    }
    return align::affine_objective(x, y, pw, pb, lambda);
  };
  return {"affine_objective", seed, finite_diff_check(fn, concat({&w, &b}))};
}

// Image and text encoders feeding clip_loss, w.r.t. every encoder parameter.
inline GradCase check_encoder_composition(std::uint64_t seed, double h = 1e-5) {
  using namespace grad_detail;
  Rng rng(derive_seed(seed, "compose"));
  auto img0 = encoders::init_params<double>(tiny_image_config(derive_seed(seed, "img")));
  auto txt0 = encoders::init_params<double>(tiny_text_config(derive_seed(seed, "txt")));
  randomize(img0, rng);
  randomize(txt0, rng);
  const std::size_t n = 3;
  std::vector<Tensor<double>> images;
  std::vector<std::vector<int>> tokens;
  for (std::size_t i = 0; i < n; ++i) {
    images.push_back(random_image(16, 16, rng));
    std::vector<int> t;
    for (std::size_t j = 0; j < 3 + i; ++j) t.push_back(static_cast<int>(rng.below(9)));
    t.push_back(2 + static_cast<int>(i));  // at least one non-PAD token
    tokens.push_back(std::move(t));
  }
  const std::size_t ni = img0.parameter_count();

  LossFn fn = [&](const Tensor<double>& p, Tensor<double>* grad) {
    auto img = img0;
    auto txt = txt0;
    encoders::unflatten<double>(p.data().subspan(0, ni), img);
    encoders::unflatten<double>(p.data().subspan(ni), txt);
    std::vector<encoders::Activations<double>> ia, ta;
    Tensor<double> u({n, img.config.d_out}), v({n, txt.config.d_out});
    for (std::size_t i = 0; i < n; ++i) {
      ia.push_back(encoders::image_forward<double>(img, images[i]));
      ta.push_back(encoders::text_forward<double>(txt, tokens[i]));
      std::copy(ia.back().out.data().begin(), ia.back().out.data().end(), u.row(i).begin());
      std::copy(ta.back().out.data().begin(), ta.back().out.data().end(), v.row(i).begin());
    }
    const auto r = contrastive::clip_loss(u, v, 0.07, true);
    if (grad) {
      auto gi = encoders::zeros_like(img);
      auto gt = encoders::zeros_like(txt);
      for (std::size_t i = 0; i < n; ++i) {
        Tensor<double> gu({u.cols()}), gv({v.cols()});
        std::copy(r.grad_u.row(i).begin(), r.grad_u.row(i).end(), gu.data().begin());
        std::copy(r.grad_v.row(i).begin(), r.grad_v.row(i).end(), gv.data().begin());
        encoders::image_backward(img, ia[i], gu, gi);
        encoders::text_backward(txt, ta[i], gv, gt);
      }
      const auto fi = encoders::flatten(gi), ft = encoders::flatten(gt);
      *grad = concat({&fi, &ft});
    }
    return r.loss;
  };
  const auto fi = encoders::flatten(img0), ft = encoders::flatten(txt0);
  return {"encoders+clip_loss", seed, finite_diff_check(fn, concat({&fi, &ft}), h)};
}

inline std::vector<GradCase> run_gradient_suite(std::size_t seeds, std::uint64_t base_seed = 0) {
  std::vector<GradCase> out;
  for (std::size_t s = 0; s < seeds; ++s) {
    const auto seed = derive_seed(base_seed, "gradcheck", s);
    out.push_back(check_clip_gradient(seed, true));
    out.push_back(check_clip_gradient(seed, false));
    out.push_back(check_dino_gradient(seed, false));
    out.push_back(check_dino_gradient(seed, true));
    out.push_back(check_affine_gradient(seed));
    out.push_back(check_encoder_composition(seed));
  }
  return out;
}

}  // namespace agriclip::pipeline
