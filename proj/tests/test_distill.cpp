#include <gtest/gtest.h>

#include <cmath>

#include "agriclip/distill/dino_loss.hpp"
#include "agriclip/distill/multi_crop.hpp"
#include "agriclip/distill/trainer.hpp"
#include "agriclip/pipeline/gradient_suite.hpp"
#include "test_support.hpp"

namespace {

using namespace agriclip;
using namespace agriclip::distill;

double brute_force_dino(const Tensor<double>& t, const Tensor<double>& s, const Tensor<double>& c, double tt,
                        double ts) {
  auto probs = [](std::vector<double> z, double tau) {
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double sum = 0;
    for (auto& v : z) sum += (v = std::exp((v - mx) / tau));
    for (auto& v : z) v /= sum;
    return z;
  };
  const std::size_t k = t.cols();
  double total = 0;
  int pairs = 0;
  for (std::size_t g = 0; g < t.rows(); ++g) {
    std::vector<double> zt(k);
    for (std::size_t j = 0; j < k; ++j) zt[j] = t(g, j) - c[j];
    const auto pt = probs(zt, tt);
    for (std::size_t v = 0; v < s.rows(); ++v) {
      if (v == g) continue;
      const auto ps = probs(std::vector<double>(s.row(v).begin(), s.row(v).end()), ts);
      for (std::size_t j = 0; j < k; ++j) total -= pt[j] * std::log(ps[j]);
      ++pairs;
    }
  }
  return total / pairs;
}

TEST(DinoLoss, UniformGivesLogK) {
  Tensor<double> t({2, 4}), s({4, 4}), c({4});
  EXPECT_NEAR(dino_loss(t, s, c, 0.04, 0.1).loss, std::log(4.0), 1e-12);
}

TEST(DinoLoss, MatchingDistributionsGiveEntropy) {
  Rng rng(3);
  const double tt = 0.04, ts = 0.1;
  for (int trial = 0; trial < 5; ++trial) {
    Tensor<double> t({1, 6}), s({2, 6}), c({6});
    for (std::size_t j = 0; j < 6; ++j) {
      t(0, j) = 0.05 * rng.normal();
      s(1, j) = t(0, j) * ts / tt;  // same softmax as the teacher
    }
    const auto r = dino_loss(t, s, c, tt, ts);
    EXPECT_NEAR(r.loss, entropy<double>(r.teacher_probs.row(0)), 1e-10);
  }
}

TEST(DinoLoss, MatchesBruteForceAndExcludesSameView) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = testkit::random_matrix(2, 5, rng, 0.1);
    const auto s = testkit::random_matrix(4, 5, rng, 0.3);
    const auto c = testkit::random_matrix(1, 5, rng, 0.05).reshaped({5});
    const double got = dino_loss(t, s, c, 0.04, 0.1).loss;
    EXPECT_NEAR(got, brute_force_dino(t, s, c, 0.04, 0.1), 1e-10);

    // Averaging over all G x (G+V) pairs instead would give a different value.
    double with_self = brute_force_dino(t, s, c, 0.04, 0.1) * 6.0;
    Tensor<double> t1({1, 5}), s1({1, 5});
    for (std::size_t g = 0; g < 2; ++g) {
      std::copy(t.row(g).begin(), t.row(g).end(), t1.row(0).begin());
      std::copy(s.row(g).begin(), s.row(g).end(), s1.row(0).begin());
      Tensor<double> pad({2, 5});
      std::copy(s1.row(0).begin(), s1.row(0).end(), pad.row(1).begin());
      with_self += dino_loss(t1, pad, c, 0.04, 0.1).loss;
    }
    EXPECT_GT(std::abs(with_self / 8.0 - got), 1e-6);
  }
}

TEST(DinoLoss, Errors) {
  Tensor<double> t({2, 4}), s({4, 4}), c({4});
  EXPECT_THROW(dino_loss(t, s, c, 0.1, 0.1), ConfigError);
  EXPECT_THROW(dino_loss(t, s, c, 0.2, 0.1), ConfigError);
  EXPECT_THROW(dino_loss(t, s, Tensor<double>({3}), 0.04, 0.1), ParameterError);
  EXPECT_THROW(dino_loss(Tensor<double>({1, 4}), Tensor<double>({1, 4}), c, 0.04, 0.1), ParameterError);
}

TEST(DinoLoss, GradientsBothHeads) {
  for (std::uint64_t s = 0; s < 10; ++s)
    for (bool unit : {false, true}) {
      const auto r = pipeline::check_dino_gradient(derive_seed(200, s), unit);
      EXPECT_TRUE(r.report.passed) << r.name << " err " << r.report.max_rel_error;
    }
}

TEST(Ema, Momenta) {
  const Tensor<double> s({3}, std::vector<double>{1, 2, 3});
  Tensor<double> t({3}, std::vector<double>{5, 5, 5});
  ema_update(t, s, 0.0);
  EXPECT_EQ(t, s);
  Tensor<double> u({3}, std::vector<double>{5, 5, 5});
  const auto before = u;
  ema_update(u, s, 1.0);
  EXPECT_EQ(u, before);
  ema_update(u, s, 0.5);
  EXPECT_EQ(u, Tensor<double>({3}, std::vector<double>{3, 3.5, 4}));
  EXPECT_THROW(ema_update(u, Tensor<double>({2}), 0.5), ParameterError);
}

TEST(Center, UpdateRule) {
  Tensor<double> c({2});
  const Tensor<double> logits({2, 2}, std::vector<double>{1, 0, 1, 2});
  center_update(c, logits, 0.9);
  EXPECT_NEAR(c[0], 0.1, 1e-15);
  EXPECT_NEAR(c[1], 0.1, 1e-15);

  Tensor<double> fixed({2}, std::vector<double>{1, 1});
  center_update(fixed, logits, 0.9);
  EXPECT_NEAR(fixed[0], 1.0, 1e-15);
  EXPECT_NEAR(fixed[1], 1.0, 1e-15);

  // Repeated updates toward a constant batch mean move the center monotonically.
  Tensor<double> m({2});
  double prev = 0;
  for (int i = 0; i < 20; ++i) {
    center_update(m, logits, 0.9);
    EXPECT_GT(m[0], prev);
    EXPECT_LT(m[0], 1.0);
    prev = m[0];
  }
}

Tensor<float> noise_image(std::size_t side, Rng& rng) {
  Tensor<float> t({side, side, 3});
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform());
  return t;
}

TEST(MultiCrop, ScalesCountAndDeterminism) {
  Rng img_rng(1);
  const auto img = noise_image(64, img_rng);
  CropConfig cfg;
  Rng a(5), b(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto views = multi_crop(img, cfg, a);
    const auto again = multi_crop(img, cfg, b);
    ASSERT_EQ(views.size(), 6u);
    for (std::size_t v = 0; v < views.size(); ++v) {
      const auto& g = views[v].geometry;
      const auto range = v < 2 ? cfg.global_scale : cfg.local_scale;
      EXPECT_GE(g.area_fraction, range.lo);
      EXPECT_LE(g.area_fraction, range.hi);
      EXPECT_LE(g.x0 + g.width, 64u);
      EXPECT_LE(g.y0 + g.height, 64u);
      EXPECT_EQ(views[v].pixels.dims(), (Dims{64, 64, 3}));
      EXPECT_EQ(views[v].pixels, again[v].pixels);
      for (float p : views[v].pixels.data()) {
        EXPECT_GE(p, 0.0f);
        EXPECT_LE(p, 1.0f);
      }
    }
  }
  EXPECT_THROW(multi_crop(noise_image(16, img_rng), cfg, a), ParameterError);
}

TEST(MultiCrop, FullCropResizeIsIdentity) {
  Rng rng(2);
  const auto img = noise_image(32, rng);
  EXPECT_EQ(resize_bilinear(img, 0, 0, 32, 32, 32, 32), img);
}

struct TinySplit {
  std::vector<corpus::SampleRecord> storage;
  corpus::LoadedSplit split;
  explicit TinySplit(std::size_t n) : storage(n) {
    Rng rng(77);
    for (auto& r : storage) {
      split.records.push_back(&r);
      split.images.push_back(noise_image(32, rng));
    }
  }
};

encoders::EncoderConfig tiny_encoder() {
  encoders::EncoderConfig c;
  c.image_height = c.image_width = 32;
  c.d_model = 8;
  c.hidden = 12;
  c.d_out = 8;
  c.init_seed = 4;
  return c;
}

DistillConfig tiny_distill() {
  DistillConfig c;
  c.prototypes = 6;
  c.crops.local_crops = 2;
  c.epochs = 2;
  c.batch_size = 4;
  c.seed = 11;
  return c;
}

TEST(Trainer, ZeroEpochsAndDeterminism) {
  TinySplit data(6);
  auto cfg = tiny_distill();
  cfg.epochs = 0;
  const auto z = train_distill(data.split, cfg, tiny_encoder());
  EXPECT_EQ(z.student, init_dino_model<float>(tiny_encoder(), 6));
  EXPECT_EQ(z.teacher, z.student);
  EXPECT_TRUE(z.history.empty());

  cfg = tiny_distill();
  const auto a = train_distill(data.split, cfg, tiny_encoder());
  const auto b = train_distill(data.split, cfg, tiny_encoder());
  EXPECT_EQ(a.student, b.student);
  EXPECT_EQ(a.teacher, b.teacher);
  EXPECT_EQ(a.center, b.center);
  ASSERT_EQ(a.history.size(), 2u);
  for (const auto& e : a.history) {
    EXPECT_TRUE(std::isfinite(e.mean_loss));
    EXPECT_GE(e.teacher_entropy, 0.0);
    EXPECT_LE(e.teacher_entropy, std::log(6.0) + 1e-6);
  }
}

// One optimiser step: the teacher is the EMA of its init and the updated student.
TEST(Trainer, TeacherIsEmaOfStudent) {
  TinySplit data(4);
  auto cfg = tiny_distill();
  cfg.epochs = 1;
  cfg.batch_size = 4;
  const auto init = init_dino_model<float>(tiny_encoder(), 6);
  const auto r = train_distill(data.split, cfg, tiny_encoder());
  EXPECT_FALSE(r.student == init);
  const auto t = r.teacher.tensors(), s = r.student.tensors(), i0 = init.tensors();
  for (std::size_t n = 0; n < t.size(); ++n)
    for (std::size_t j = 0; j < t[n]->size(); ++j)
      EXPECT_NEAR((*t[n])[j], 0.996 * (*i0[n])[j] + 0.004 * (*s[n])[j], 1e-6);

  cfg.ema_momentum = 0.0;
  const auto copy = train_distill(data.split, cfg, tiny_encoder());
  EXPECT_EQ(copy.teacher, copy.student);
}

TEST(Trainer, ConfigErrors) {
  TinySplit data(4);
  auto cfg = tiny_distill();
  cfg.teacher_temperature = 0.2;
  EXPECT_THROW(train_distill(data.split, cfg, tiny_encoder()), ConfigError);
  cfg = tiny_distill();
  cfg.crops.local_scale = {0.0, 0.4};
  EXPECT_THROW(train_distill(data.split, cfg, tiny_encoder()), ConfigError);
  cfg = tiny_distill();
  cfg.ema_momentum = 1.0;
  EXPECT_THROW(train_distill(data.split, cfg, tiny_encoder()), ConfigError);
  TinySplit empty(0);
  EXPECT_THROW(train_distill(empty.split, tiny_distill(), tiny_encoder()), ConfigError);
}

}  // namespace
