#pragma once

#include <span>
#include <vector>

#include "agriclip/corpus/vocab.hpp"
#include "agriclip/encoders/params.hpp"
#include "agriclip/numerics/kernels.hpp"

namespace agriclip::encoders {

// Intermediate values of one forward pass, kept for the backward pass.
template <typename T>
struct Activations {
  std::vector<T> folded;  // image: mean patch (centred pixels); text: unused
  std::vector<int> tokens;  // text: non-PAD ids
  std::vector<T> pooled, a1, h1, m;
  Tensor<T> raw;  // pre-normalisation output
  T raw_norm = 0;
  Tensor<T> out;  // unit-norm embedding
};

namespace detail {

// pooled -> GELU MLP -> projection -> l2 normalisation.
template <typename T>
void head_forward(const EncoderParams<T>& p, Activations<T>& act) {
  const auto& c = p.config;
  act.a1.assign(c.hidden, T(0));
  vecmat<T>(act.pooled, p.w1, act.a1);
  act.h1.resize(c.hidden);
  for (std::size_t i = 0; i < c.hidden; ++i) {
    act.a1[i] += p.b1[i];
    act.h1[i] = gelu(act.a1[i]);
  }
  act.m.assign(c.d_model, T(0));
  vecmat<T>(act.h1, p.w2, act.m);
  for (std::size_t i = 0; i < c.d_model; ++i) act.m[i] += p.b2[i];
  act.raw = Tensor<T>({c.d_out});
  vecmat<T>(act.m, p.proj, act.raw.data());
  act.raw_norm = norm2<T>(act.raw.data());
  act.out = l2_normalize(act.raw);
}

// Returns dL/dpooled and accumulates head gradients into g.
template <typename T>
std::vector<T> head_backward(const EncoderParams<T>& p, const Activations<T>& act, const Tensor<T>& grad_out,
                             EncoderParams<T>& g) {
  const auto& c = p.config;
  const Tensor<T> d_raw = l2_normalize_backward(act.out, act.raw_norm, grad_out);
  add_outer<T>(act.m, d_raw.data(), g.proj);
  std::vector<T> d_m(c.d_model);
  matvec<T>(p.proj, d_raw.data(), d_m);
  add_outer<T>(act.h1, d_m, g.w2);
  for (std::size_t i = 0; i < c.d_model; ++i) g.b2[i] += d_m[i];
  std::vector<T> d_a1(c.hidden);
  matvec<T>(p.w2, d_m, d_a1);
  for (std::size_t i = 0; i < c.hidden; ++i) {
    d_a1[i] *= gelu_grad(act.a1[i]);
    g.b1[i] += d_a1[i];
  }
  add_outer<T>(act.pooled, d_a1, g.w1);
  std::vector<T> d_pooled(c.d_model);
  matvec<T>(p.w1, d_a1, d_pooled);
  return d_pooled;
}

}  // namespace detail

// Mean over all patches of the centred image, laid out as (row, col, channel)
// within a patch. Because the patch embedding is linear, embedding this mean
// patch equals mean-pooling the per-patch embeddings.
template <typename T, typename Pixel>
std::vector<T> fold_patches(const Tensor<Pixel>& image, std::size_t patch) {
  const std::size_t h = image.dims()[0], w = image.dims()[1];
  const std::size_t pd = patch * patch * 3;
  std::vector<T> folded(pd, T(0));
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t py = y % patch;
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t base = (py * patch + x % patch) * 3;
      const std::size_t src = (y * w + x) * 3;
      for (std::size_t ch = 0; ch < 3; ++ch) folded[base + ch] += static_cast<T>(image[src + ch]) - T(0.5);
    }
  }
  const T inv = T(1) / static_cast<T>((h / patch) * (w / patch));
  for (auto& v : folded) v *= inv;
  return folded;
}

// patchify -> linear patch embedding + positional embedding -> mean-pool ->
// GELU MLP -> projection -> l2 normalisation.
template <typename T, typename Pixel>
Activations<T> image_forward(const EncoderParams<T>& p, const Tensor<Pixel>& image) {
  const auto& c = p.config;
  if (c.kind != EncoderKind::Image) throw ParameterError("image_forward: not an image encoder");
  if (image.rank() != 3 || image.dims()[0] != c.image_height || image.dims()[1] != c.image_width ||
      image.dims()[2] != 3) {
    throw ParameterError("image_forward: expected " + std::to_string(c.image_height) + "x" +
                         std::to_string(c.image_width) + "x3 image, got " + dims_string(image.dims()));
  }
  Activations<T> act;
  act.folded = fold_patches<T>(image, c.patch_size);
  act.pooled.assign(c.d_model, T(0));
  vecmat<T>(act.folded, p.embed, act.pooled);
  const std::size_t np = c.num_patches();
  const T inv = T(1) / static_cast<T>(np);
  std::vector<T> pos_mean(c.d_model, T(0));
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t d = 0; d < c.d_model; ++d) pos_mean[d] += p.pos(i, d);
  for (std::size_t d = 0; d < c.d_model; ++d) act.pooled[d] += pos_mean[d] * inv;
  detail::head_forward(p, act);
  return act;
}

template <typename T>
void image_backward(const EncoderParams<T>& p, const Activations<T>& act, const Tensor<T>& grad_out,
                    EncoderParams<T>& g) {
  const auto d_pooled = detail::head_backward(p, act, grad_out, g);
  add_outer<T>(act.folded, d_pooled, g.embed);
  const std::size_t np = p.config.num_patches();
  const T inv = T(1) / static_cast<T>(np);
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t d = 0; d < p.config.d_model; ++d) g.pos(i, d) += d_pooled[d] * inv;
}

template <typename T, typename Pixel>
Tensor<T> encode_image(const EncoderParams<T>& p, const Tensor<Pixel>& image) {
  return image_forward<T>(p, image).out;
}

// token lookup -> mean over non-PAD tokens -> GELU MLP -> projection -> l2.
template <typename T>
Activations<T> text_forward(const EncoderParams<T>& p, std::span<const int> token_ids) {
  const auto& c = p.config;
  if (c.kind != EncoderKind::Text) throw ParameterError("text_forward: not a text encoder");
  if (token_ids.empty()) throw ParameterError("text_forward: empty token list");
  Activations<T> act;
  for (int id : token_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size)
      throw ParameterError("text_forward: token id " + std::to_string(id) + " outside vocabulary of " +
                           std::to_string(c.vocab_size));
    if (id != corpus::kPadId) act.tokens.push_back(id);
  }
  if (act.tokens.empty()) throw ParameterError("text_forward: prompt contains only padding");
  act.pooled.assign(c.d_model, T(0));
  for (int id : act.tokens)
    for (std::size_t d = 0; d < c.d_model; ++d) act.pooled[d] += p.embed(static_cast<std::size_t>(id), d);
  const T inv = T(1) / static_cast<T>(act.tokens.size());
  for (auto& v : act.pooled) v *= inv;
  detail::head_forward(p, act);
  return act;
}

template <typename T>
void text_backward(const EncoderParams<T>& p, const Activations<T>& act, const Tensor<T>& grad_out,
                   EncoderParams<T>& g) {
  const auto d_pooled = detail::head_backward(p, act, grad_out, g);
  const T inv = T(1) / static_cast<T>(act.tokens.size());
  for (int id : act.tokens)
    for (std::size_t d = 0; d < p.config.d_model; ++d) g.embed(static_cast<std::size_t>(id), d) += d_pooled[d] * inv;
}

template <typename T>
Tensor<T> encode_text(const EncoderParams<T>& p, std::span<const int> token_ids) {
  return text_forward<T>(p, token_ids).out;
}

}  // namespace agriclip::encoders
