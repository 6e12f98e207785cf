#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "agriclip/numerics/rng.hpp"
#include "agriclip/numerics/tensor.hpp"

namespace agriclip::distill {

struct ScaleRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct CropConfig {
  ScaleRange global_scale{0.4, 1.0};
  ScaleRange local_scale{0.05, 0.4};
  std::size_t global_crops = 2;
  std::size_t local_crops = 4;
  double flip_probability = 0.5;
  double brightness = 0.2;  // factor drawn from [1 - b, 1 + b]
  std::size_t out_height = 64;
  std::size_t out_width = 64;
};

struct CropGeometry {
  std::size_t x0 = 0, y0 = 0, width = 0, height = 0;
  bool flipped = false;
  double brightness_factor = 1.0;
  double area_fraction = 0.0;  // crop area / source area
};

struct View {
  CropGeometry geometry;
  Tensor<float> pixels;  // out_height x out_width x 3
};

// Bilinear resample of an H x W x C region to out_h x out_w (half-pixel centres).
inline Tensor<float> resize_bilinear(const Tensor<float>& src, std::size_t x0, std::size_t y0, std::size_t cw,
                                     std::size_t ch, std::size_t out_h, std::size_t out_w) {
  const std::size_t sw = src.dims()[1], c = src.dims()[2];
  Tensor<float> out({out_h, out_w, c});
  const double sy = double(ch) / double(out_h), sx = double(cw) / double(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(ch - 1));
    const auto iy = static_cast<std::size_t>(fy);
    const std::size_t iy1 = std::min(iy + 1, ch - 1);
    const double ty = fy - double(iy);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(cw - 1));
      const auto ix = static_cast<std::size_t>(fx);
      const std::size_t ix1 = std::min(ix + 1, cw - 1);
      const double tx = fx - double(ix);
      for (std::size_t k = 0; k < c; ++k) {
        auto at = [&](std::size_t yy, std::size_t xx) {
          return double(src.data()[((y0 + yy) * sw + (x0 + xx)) * c + k]);
        };
        const double v = (1 - ty) * ((1 - tx) * at(iy, ix) + tx * at(iy, ix1)) +
                         ty * ((1 - tx) * at(iy1, ix) + tx * at(iy1, ix1));
        out(y, x, k) = static_cast<float>(v);
      }
    }
  }
  return out;
}

// Random-resized-crop geometry whose area fraction lies inside `range`.
inline CropGeometry sample_crop(std::size_t h, std::size_t w, ScaleRange range, Rng& rng) {
  const double area = double(h * w);
  for (int attempt = 0; attempt < 20; ++attempt) {
    const double scale = rng.uniform(range.lo, range.hi);
    const double log_ratio = rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
    const double ratio = std::exp(log_ratio);
    const auto cw = static_cast<std::size_t>(std::lround(std::sqrt(scale * area * ratio)));
    const auto ch = static_cast<std::size_t>(std::lround(std::sqrt(scale * area / ratio)));
    if (cw == 0 || ch == 0 || cw > w || ch > h) continue;
    const double frac = double(cw * ch) / area;
    if (frac < range.lo || frac > range.hi) continue;
    CropGeometry g;
    g.width = cw;
    g.height = ch;
    g.x0 = rng.below(w - cw + 1);
    g.y0 = rng.below(h - ch + 1);
    g.area_fraction = frac;
    return g;
  }
  // Square fallback at the largest side allowed by the upper bound.
  CropGeometry g;
  std::size_t side = std::min<std::size_t>({h, w, static_cast<std::size_t>(std::sqrt(range.hi * area))});
  side = std::max<std::size_t>(side, 1);
  g.width = g.height = side;
  g.x0 = rng.below(w - side + 1);
  g.y0 = rng.below(h - side + 1);
  g.area_fraction = double(side * side) / area;
  return g;
}

inline View make_view(const Tensor<float>& image, ScaleRange range, const CropConfig& cfg, Rng& rng) {
  View v;
  v.geometry = sample_crop(image.dims()[0], image.dims()[1], range, rng);
  v.geometry.flipped = rng.bernoulli(cfg.flip_probability);
  v.geometry.brightness_factor = rng.uniform(1.0 - cfg.brightness, 1.0 + cfg.brightness);
  const auto& g = v.geometry;
  v.pixels = resize_bilinear(image, g.x0, g.y0, g.width, g.height, cfg.out_height, cfg.out_width);
  const std::size_t oh = cfg.out_height, ow = cfg.out_width;
  if (g.flipped)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow / 2; ++x)
        for (std::size_t k = 0; k < 3; ++k) std::swap(v.pixels(y, x, k), v.pixels(y, ow - 1 - x, k));
  const auto f = static_cast<float>(g.brightness_factor);
  for (auto& p : v.pixels.data()) p = std::clamp(p * f, 0.0f, 1.0f);
  return v;
}

// G global views followed by V local views.
inline std::vector<View> multi_crop(const Tensor<float>& image, const CropConfig& cfg, Rng& rng) {
  if (image.rank() != 3 || image.dims()[0] < 32 || image.dims()[1] < 32)
    throw ParameterError("multi_crop: image must be at least 32x32");
  std::vector<View> views;
  views.reserve(cfg.global_crops + cfg.local_crops);
  for (std::size_t i = 0; i < cfg.global_crops; ++i) views.push_back(make_view(image, cfg.global_scale, cfg, rng));
  for (std::size_t i = 0; i < cfg.local_crops; ++i) views.push_back(make_view(image, cfg.local_scale, cfg, rng));
  return views;
}

}  // namespace agriclip::distill
