#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "agriclip/corpus/class_def.hpp"
#include "agriclip/numerics/rng.hpp"
#include "agriclip/numerics/tensor.hpp"

namespace agriclip::corpus {

// Fraction of the image any single fine attribute may touch. Two siblings
// with different attributes therefore differ on at most twice this.
inline constexpr double kMaxAttributeArea = 0.075;

struct ImageSize {
  std::size_t height = 64;
  std::size_t width = 64;
};

namespace detail {

inline double stripe(double t, double period) {
  return 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * t / period);
}

// Pattern intensity in [0, 1] for every pixel.
inline std::vector<double> pattern_intensity(BasePattern pattern, Rng& rng, ImageSize size) {
  const auto h = size.height, w = size.width;
  std::vector<double> p(h * w);
  const double phase_x = rng.uniform(0.0, 8.0);
  const double phase_y = rng.uniform(0.0, 8.0);
  auto at = [&](std::size_t y, std::size_t x) -> double& { return p[y * w + x]; };
  switch (pattern) {
    case BasePattern::HorizontalStripes:
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) at(y, x) = stripe(y + phase_y, 8.0);
      break;
    case BasePattern::VerticalStripes:
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) at(y, x) = stripe(x + phase_x, 8.0);
      break;
    case BasePattern::DiagonalStripes:
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) at(y, x) = stripe(x + y + phase_x, 8.0);
      break;
    case BasePattern::Checker: {
      const auto ox = static_cast<std::size_t>(phase_x), oy = static_cast<std::size_t>(phase_y);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) at(y, x) = (((x + ox) / 4 + (y + oy) / 4) % 2) ? 0.9 : 0.1;
      break;
    }
    case BasePattern::Rings: {
      const double cx = rng.uniform(0.25, 0.75) * w, cy = rng.uniform(0.25, 0.75) * h;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) at(y, x) = stripe(std::hypot(x - cx, y - cy), 6.0);
      break;
    }
    case BasePattern::Dots:
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double dx = std::fmod(x + phase_x, 8.0) - 4.0;
          const double dy = std::fmod(y + phase_y, 8.0) - 4.0;
          at(y, x) = std::hypot(dx, dy) < 2.2 ? 0.95 : 0.15;
        }
      break;
    case BasePattern::Gradient: {
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double c = std::cos(angle), s = std::sin(angle);
      const double half = 0.5 * std::hypot(double(h), double(w));
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double t = ((x - 0.5 * w) * c + (y - 0.5 * h) * s) / half;
          at(y, x) = std::clamp(0.5 + 0.5 * t, 0.0, 1.0);
        }
      break;
    }
    case BasePattern::Blotches: {
      struct Blob { double x, y, r; };
      std::vector<Blob> blobs;
      for (int i = 0; i < 5; ++i)
        blobs.push_back({rng.uniform(0.0, double(w)), rng.uniform(0.0, double(h)), rng.uniform(5.0, 12.0)});
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          double v = 0;
          for (const auto& b : blobs) {
            const double d2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
            v += std::exp(-d2 / (2.0 * b.r * b.r));
          }
          at(y, x) = std::min(1.0, v);
        }
      break;
    }
  }
  return p;
}

// Region mask and per-pixel modulation (+1/-1 for textures, 1 for plain
// shifts) of one fine attribute. Pixels outside the mask have weight 0.
inline std::vector<double> attribute_weights(FineAttributeKind kind, Rng& rng, ImageSize size) {
  const auto h = size.height, w = size.width;
  std::vector<double> wgt(h * w, 0.0);
  const auto budget = static_cast<std::size_t>(kMaxAttributeArea * double(h * w));
  std::size_t used = 0;
  auto mark = [&](std::size_t y, std::size_t x, double v) {
    double& cell = wgt[y * w + x];
    if (cell == 0.0) {
      if (used >= budget) return;
      ++used;
    }
    cell = v;
  };
  // Every attribute is a scatter of small elements, so most crops of an image
  // contain some of it.
  auto centre = [&](double margin) {
    return std::pair{rng.uniform(margin, w - margin), rng.uniform(margin, h - margin)};
  };
  switch (kind) {
    case FineAttributeKind::SpotDensity: {
      // Small lesions.
      for (int i = 0; i < 14; ++i) {
        const auto [cx, cy] = centre(3.0);
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x)
            if (std::hypot(x - cx, y - cy) <= 1.6) mark(y, x, 1.0);
      }
      break;
    }
    case FineAttributeKind::StripeWidth: {
      // Square windows of fine alternating striations.
      const int windows = 8;
      const auto side = static_cast<std::size_t>(std::sqrt(double(budget) / windows));
      for (int i = 0; i < windows; ++i) {
        const auto x0 = rng.below(w - side), y0 = rng.below(h - side);
        for (std::size_t y = y0; y < y0 + side; ++y)
          for (std::size_t x = x0; x < x0 + side; ++x) mark(y, x, (x % 2) ? 1.0 : -1.0);
      }
      break;
    }
    case FineAttributeKind::ColorShift: {
      // Discoloured patches, larger and fewer than lesions.
      const int patches = 6;
      const double r = std::sqrt(double(budget) / (patches * std::numbers::pi));
      for (int i = 0; i < patches; ++i) {
        const auto [cx, cy] = centre(r);
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x)
            if (std::hypot(x - cx, y - cy) <= r) mark(y, x, 1.0);
      }
      break;
    }
    case FineAttributeKind::EdgeCurl: {
      // Short wavy strokes, three pixels thick.
      const int strokes = 8;
      const std::size_t len = 12;
      for (int i = 0; i < strokes; ++i) {
        const auto [cx, cy] = centre(8.0);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t t = 0; t < len; ++t) {
          const double yc = cy + 2.0 * std::sin(phase + 2.0 * std::numbers::pi * double(t) / 6.0);
          const auto x = static_cast<std::size_t>(cx - len / 2.0 + double(t));
          for (int d = -1; d <= 1; ++d) mark(static_cast<std::size_t>(std::lround(yc)) + d, x, 1.0);
        }
      }
      break;
    }
  }
  return wgt;
}

// Zero-sum colour shifts keep the mean pixel value unchanged.
inline Rgb attribute_shift(FineAttributeKind kind) {
  switch (kind) {
    case FineAttributeKind::SpotDensity: return {0.20, -0.30, 0.10};   // brown lesions
    case FineAttributeKind::StripeWidth: return {0.18, 0.18, 0.18};    // +/- striations
    case FineAttributeKind::ColorShift: return {0.18, 0.12, -0.30};    // yellowing
    case FineAttributeKind::EdgeCurl: return {0.12, -0.26, 0.14};      // necrotic margin
  }
  return {0, 0, 0};
}

}  // namespace detail

// Base render of a pattern family and colour; no class identity involved, so
// sibling classes with the same seed share every pixel outside their
// attribute regions.
inline Tensor<double> render_base(BasePattern pattern, const Rgb& color, std::uint64_t seed, ImageSize size) {
  Rng rng(derive_seed(seed, "base"));
  const auto p = detail::pattern_intensity(pattern, rng, size);
  const double brightness = rng.uniform(-0.02, 0.02);
  Rgb tint;
  for (auto& t : tint) t = rng.uniform(-0.01, 0.01);
  Tensor<double> img({size.height, size.width, 3});
  for (std::size_t y = 0; y < size.height; ++y)
    for (std::size_t x = 0; x < size.width; ++x) {
      const double shade = 0.55 + 0.45 * p[y * size.width + x];
      for (std::size_t c = 0; c < 3; ++c)
        img(y, x, c) = color[c] * shade + brightness + tint[c] + 0.02 * rng.normal();
    }
  return img;
}

// Pixels touched by the attribute of `kind` for this seed.
inline std::vector<double> attribute_region(FineAttributeKind kind, std::uint64_t seed, ImageSize size) {
  Rng rng(derive_seed(seed, "attribute", static_cast<std::uint64_t>(kind)));
  return detail::attribute_weights(kind, rng, size);
}

inline Tensor<float> to_pixels(const Tensor<double>& img) {
  Tensor<float> out(img.dims());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = static_cast<float>(std::clamp(img[i], 0.0, 1.0));
  return out;
}

// Deterministic render of one sample: H x W x 3, values in [0, 1].
inline Tensor<float> render_sample(const ClassDef& cls, std::uint64_t seed, ImageSize size = {}) {
  if (size.height < 32 || size.width < 32) throw ParameterError("render_sample: image must be at least 32x32");
  Tensor<double> img = render_base(cls.base_pattern, cls.base_color, seed, size);
  const double m = cls.fine_attribute.magnitude;
  if (m > 0.0) {
    const auto weights = attribute_region(cls.fine_attribute.kind, seed, size);
    const Rgb shift = detail::attribute_shift(cls.fine_attribute.kind);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] == 0.0) continue;
      for (std::size_t c = 0; c < 3; ++c) img[i * 3 + c] += m * weights[i] * shift[c];
    }
  }
  return to_pixels(img);
}

}  // namespace agriclip::corpus
