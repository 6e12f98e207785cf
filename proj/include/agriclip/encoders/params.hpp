#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "agriclip/numerics/rng.hpp"
#include "agriclip/numerics/tensor.hpp"

namespace agriclip::encoders {

enum class EncoderKind { Image, Text };

inline std::string_view to_string(EncoderKind k) { return k == EncoderKind::Image ? "image" : "text"; }

struct EncoderConfig {
  EncoderKind kind = EncoderKind::Image;
  std::size_t image_height = 64;  // image only
  std::size_t image_width = 64;   // image only
  std::size_t patch_size = 8;     // image only
  std::size_t vocab_size = 0;     // text only
  std::size_t d_model = 64;
  std::size_t hidden = 128;
  std::size_t d_out = 64;
  std::uint64_t init_seed = 0;

  std::size_t patch_dim() const { return patch_size * patch_size * 3; }
  std::size_t num_patches() const { return (image_height / patch_size) * (image_width / patch_size); }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

inline void validate(const EncoderConfig& c) {
  if (c.d_model == 0 || c.hidden == 0) throw ConfigError("encoder dims must be positive");
  if (c.d_out < 8) throw ConfigError("encoder output dim must be at least 8");
  if (c.kind == EncoderKind::Image) {
    if (c.patch_size == 0 || c.image_height == 0 || c.image_width == 0)
      throw ConfigError("image encoder extents must be positive");
    if (c.image_height % c.patch_size || c.image_width % c.patch_size)
      throw ConfigError("patch size " + std::to_string(c.patch_size) + " does not divide image extent " +
                        std::to_string(c.image_height) + "x" + std::to_string(c.image_width));
  } else if (c.vocab_size < 2) {
    throw ConfigError("text encoder needs a vocabulary with the reserved ids");
  }
}

// Parameters of one encoder. The same struct doubles as a gradient buffer.
template <typename T>
struct EncoderParams {
  EncoderConfig config;
  Tensor<T> embed;  // image: patch_dim x d_model; text: vocab x d_model
  Tensor<T> pos;    // image: num_patches x d_model; absent for text
  Tensor<T> w1, b1, w2, b2;
  Tensor<T> proj;   // d_model x d_out, no bias

  // Visits (name, tensor) in a fixed order; absent tensors are skipped.
  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    const bool image = self.config.kind == EncoderKind::Image;
    f(std::string_view(image ? "patch_embed" : "token_embed"), self.embed);
    if (image) f(std::string_view("pos_embed"), self.pos);
    f(std::string_view("mlp.w1"), self.w1);
    f(std::string_view("mlp.b1"), self.b1);
    f(std::string_view("mlp.w2"), self.w2);
    f(std::string_view("mlp.b2"), self.b2);
    f(std::string_view("proj"), self.proj);
  }
  template <typename F>
  void for_each(F&& f) { visit(*this, std::forward<F>(f)); }
  template <typename F>
  void for_each(F&& f) const { visit(*this, std::forward<F>(f)); }

  std::vector<Tensor<T>*> tensors() {
    std::vector<Tensor<T>*> out;
    for_each([&](std::string_view, Tensor<T>& t) { out.push_back(&t); });
    return out;
  }
  std::vector<const Tensor<T>*> tensors() const {
    std::vector<const Tensor<T>*> out;
    for_each([&](std::string_view, const Tensor<T>& t) { out.push_back(&t); });
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](std::string_view, const Tensor<T>& t) { n += t.size(); });
    return n;
  }

  template <typename U>
  EncoderParams<U> cast() const {
    EncoderParams<U> out;
    out.config = config;
    out.embed = embed.template cast<U>();
    if (!pos.empty()) out.pos = pos.template cast<U>();
    out.w1 = w1.template cast<U>();
    out.b1 = b1.template cast<U>();
    out.w2 = w2.template cast<U>();
    out.b2 = b2.template cast<U>();
    out.proj = proj.template cast<U>();
    return out;
  }

  friend bool operator==(const EncoderParams& a, const EncoderParams& b) {
    return a.config == b.config && a.embed == b.embed && a.pos == b.pos && a.w1 == b.w1 && a.b1 == b.b1 &&
           a.w2 == b.w2 && a.b2 == b.b2 && a.proj == b.proj;
  }
};

// fan-in used for the uniform init bound of each tensor. Embedding tables are
// lookups (or pooled lookups), so they are scaled by the width they feed.
inline std::size_t fan_in(const EncoderConfig& c, std::string_view name) {
  if (name == "patch_embed") return c.patch_dim();
  if (name == "token_embed" || name == "pos_embed") return c.d_model;
  if (name == "mlp.w1") return c.d_model;
  if (name == "mlp.w2") return c.hidden;
  if (name == "proj") return c.d_model;
  return 1;
}

inline bool is_bias(std::string_view name) { return name == "mlp.b1" || name == "mlp.b2"; }

template <typename T>
EncoderParams<T> zeros_like(const EncoderParams<T>& p) {
  EncoderParams<T> z;
  z.config = p.config;
  z.embed = Tensor<T>(p.embed.dims());
  if (!p.pos.empty()) z.pos = Tensor<T>(p.pos.dims());
  z.w1 = Tensor<T>(p.w1.dims());
  z.b1 = Tensor<T>(p.b1.dims());
  z.w2 = Tensor<T>(p.w2.dims());
  z.b2 = Tensor<T>(p.b2.dims());
  z.proj = Tensor<T>(p.proj.dims());
  return z;
}

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero.
template <typename T = float>
EncoderParams<T> init_params(const EncoderConfig& config) {
  validate(config);
  EncoderParams<T> p;
  p.config = config;
  const bool image = config.kind == EncoderKind::Image;
  p.embed = Tensor<T>({image ? config.patch_dim() : config.vocab_size, config.d_model});
  if (image) p.pos = Tensor<T>({config.num_patches(), config.d_model});
  p.w1 = Tensor<T>({config.d_model, config.hidden});
  p.b1 = Tensor<T>({config.hidden});
  p.w2 = Tensor<T>({config.hidden, config.d_model});
  p.b2 = Tensor<T>({config.d_model});
  p.proj = Tensor<T>({config.d_model, config.d_out});

  Rng rng(config.init_seed);
  p.for_each([&](std::string_view name, Tensor<T>& t) {
    if (is_bias(name)) return;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(config, name)));
    for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  });
  return p;
}

// Flat parameter vector (visit order) and its inverse, for gradient checks.
template <typename T>
Tensor<T> flatten(const EncoderParams<T>& p) {
  std::vector<T> flat;
  flat.reserve(p.parameter_count());
  p.for_each([&](std::string_view, const Tensor<T>& t) { flat.insert(flat.end(), t.data().begin(), t.data().end()); });
  const std::size_t n = flat.size();
  return Tensor<T>({n}, std::move(flat));
}

template <typename T>
void unflatten(std::span<const T> flat, EncoderParams<T>& p) {
  if (flat.size() != p.parameter_count()) throw ParameterError("unflatten: length mismatch");
  std::size_t off = 0;
  p.for_each([&](std::string_view, Tensor<T>& t) {
    std::copy(flat.begin() + off, flat.begin() + off + t.size(), t.data().begin());
    off += t.size();
  });
}

template <typename T>
void add_scaled(EncoderParams<T>& acc, const EncoderParams<T>& g, T scale = T(1)) {
  auto dst = acc.tensors();
  auto src = g.tensors();
  for (std::size_t i = 0; i < dst.size(); ++i)
    for (std::size_t j = 0; j < dst[i]->size(); ++j) (*dst[i])[j] += scale * (*src[i])[j];
}

}  // namespace agriclip::encoders
