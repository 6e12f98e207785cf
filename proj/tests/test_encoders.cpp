#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "agriclip/encoders/encoder.hpp"
#include "agriclip/pipeline/gradient_suite.hpp"
#include "test_support.hpp"

namespace {

using namespace agriclip;
using namespace agriclip::encoders;

EncoderConfig image_cfg(std::uint64_t seed = 1) {
  EncoderConfig c;
  c.image_height = c.image_width = 32;
  c.patch_size = 8;
  c.d_model = 12;
  c.hidden = 20;
  c.d_out = 10;
  c.init_seed = seed;
  return c;
}

EncoderConfig text_cfg(std::uint64_t seed = 2) {
  EncoderConfig c;
  c.kind = EncoderKind::Text;
  c.vocab_size = 11;
  c.d_model = 12;
  c.hidden = 20;
  c.d_out = 10;
  c.init_seed = seed;
  return c;
}

Tensor<float> noise_image(std::size_t h, std::size_t w, Rng& rng) {
  Tensor<float> t({h, w, 3});
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform());
  return t;
}

TEST(Init, DeterministicZeroBiasesBoundedWeights) {
  for (const auto& cfg : {image_cfg(), text_cfg()}) {
    const auto a = init_params<double>(cfg), b = init_params<double>(cfg);
    EXPECT_EQ(a, b);
    auto other = cfg;
    other.init_seed += 1;
    EXPECT_FALSE(a == init_params<double>(other));
    a.for_each([&](std::string_view name, const Tensor<double>& t) {
      if (is_bias(name)) {
        for (double v : t.data()) EXPECT_EQ(v, 0.0) << name;
        return;
      }
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(cfg, name)));
      for (double v : t.data()) EXPECT_LE(std::abs(v), bound) << name;
    });
  }
}

TEST(Init, ConfigValidation) {
  auto c = image_cfg();
  c.patch_size = 7;
  EXPECT_THROW(validate(c), ConfigError);
  auto t = text_cfg();
  t.vocab_size = 1;
  EXPECT_THROW(validate(t), ConfigError);
  t = text_cfg();
  t.d_out = 4;
  EXPECT_THROW(validate(t), ConfigError);
}

TEST(Flatten, RoundTrip) {
  auto p = init_params<double>(image_cfg());
  const auto flat = flatten(p);
  EXPECT_EQ(flat.size(), p.parameter_count());
  auto q = zeros_like(p);
  unflatten<double>(flat.data(), q);
  EXPECT_EQ(p, q);
}

TEST(ImageEncoder, UnitNormAndDeterministic) {
  Rng rng(4);
  const auto p = init_params<double>(image_cfg());
  for (int i = 0; i < 20; ++i) {
    const auto img = noise_image(32, 32, rng);
    const auto a = encode_image<double>(p, img);
    EXPECT_NEAR(norm2<double>(a.data()), 1.0, 1e-9);
    EXPECT_EQ(a, encode_image<double>(p, img));
  }
  EXPECT_THROW(encode_image<double>(p, noise_image(64, 64, rng)), ParameterError);
}

// Independent forward for an image tiled from one patch with zero positional
// embeddings: the mean patch is that patch, so the output is the single-patch path.
TEST(ImageEncoder, TiledPatchMatchesSinglePatchComputation) {
  Rng rng(6);
  auto p = init_params<double>(image_cfg());
  for (auto& v : p.b1.data()) v = 0.1 * rng.normal();
  for (auto& v : p.b2.data()) v = 0.1 * rng.normal();
  p.pos.fill(0.0);
  const auto patch = noise_image(8, 8, rng);
  Tensor<float> img({32, 32, 3});
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x)
      for (std::size_t c = 0; c < 3; ++c) img(y, x, c) = patch(y % 8, x % 8, c);

  const auto& cfg = p.config;
  std::vector<double> e(cfg.d_model, 0.0);
  for (std::size_t i = 0; i < cfg.patch_dim(); ++i)
    for (std::size_t d = 0; d < cfg.d_model; ++d) e[d] += (double(patch[i]) - 0.5) * p.embed(i, d);
  std::vector<double> h(cfg.hidden), m(cfg.d_model), out(cfg.d_out);
  for (std::size_t j = 0; j < cfg.hidden; ++j) {
    double a = p.b1[j];
    for (std::size_t d = 0; d < cfg.d_model; ++d) a += e[d] * p.w1(d, j);
    h[j] = 0.5 * a * (1.0 + std::erf(a / std::sqrt(2.0)));
  }
  for (std::size_t d = 0; d < cfg.d_model; ++d) {
    m[d] = p.b2[d];
    for (std::size_t j = 0; j < cfg.hidden; ++j) m[d] += h[j] * p.w2(j, d);
  }
  double n = 0;
  for (std::size_t k = 0; k < cfg.d_out; ++k) {
    for (std::size_t d = 0; d < cfg.d_model; ++d) out[k] += m[d] * p.proj(d, k);
    n += out[k] * out[k];
  }
  const auto got = encode_image<double>(p, img);
  for (std::size_t k = 0; k < cfg.d_out; ++k) EXPECT_NEAR(got[k], out[k] / std::sqrt(n), 1e-9);
}

TEST(TextEncoder, BagOfWordsProperties) {
  const auto p = init_params<double>(text_cfg());
  const std::vector<int> a{2, 5, 7, 9}, b{9, 7, 2, 5};
  const auto ea = encode_text<double>(p, a), eb = encode_text<double>(p, b);
  for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_NEAR(ea[i], eb[i], 1e-15);
  EXPECT_NEAR(norm2<double>(encode_text<double>(p, a).data()), 1.0, 1e-9);
  const std::vector<int> all_oov{1, 1, 1, 1}, one_oov{1};
  const auto x = encode_text<double>(p, all_oov), y = encode_text<double>(p, one_oov);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], y[i], 1e-15);
  const std::vector<int> padded{2, 0, 5, 0}, plain{2, 5};
  EXPECT_EQ(encode_text<double>(p, padded), encode_text<double>(p, plain));
  EXPECT_THROW(encode_text<double>(p, std::vector<int>{0, 0}), ParameterError);
  EXPECT_THROW(encode_text<double>(p, std::vector<int>{11}), ParameterError);
}

TEST(Gradients, ImageAndTextBackward) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto r = pipeline::check_encoder_composition(derive_seed(500, s));
    EXPECT_TRUE(r.report.passed) << "seed " << s << " err " << r.report.max_rel_error;
  }
}

TEST(Gradients, ScalingOutputWeightsLeavesEmbeddingUnchanged) {
  Rng rng(2);
  auto p = init_params<double>(image_cfg());
  const auto img = noise_image(32, 32, rng);
  const auto before = encode_image<double>(p, img);
  for (auto& v : p.proj.data()) v *= 3.5;
  const auto after = encode_image<double>(p, img);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(before[i], after[i], 1e-12);
}

}  // namespace
