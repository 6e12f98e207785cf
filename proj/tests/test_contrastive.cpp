#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "agriclip/contrastive/clip_loss.hpp"
#include "agriclip/contrastive/trainer.hpp"
#include "agriclip/corpus/build.hpp"
#include "agriclip/corpus/dataset.hpp"
#include "agriclip/pipeline/gradient_suite.hpp"
#include "test_support.hpp"

namespace {

using namespace agriclip;
using contrastive::clip_loss;

// Loss of the formula, written out term by term.
double brute_force_clip(const Tensor<double>& u, const Tensor<double>& v, double tau, bool symmetric) {
  const std::size_t n = u.rows(), d = u.cols();
  auto sim = [&](std::size_t i, std::size_t k) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) s += u(i, j) * v(k, j);
    return s;
  };
  double i2t = 0, t2i = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0, col = 0;
    for (std::size_t k = 0; k < n; ++k) {
      row += std::exp(sim(i, k) / tau);
      col += std::exp(sim(k, i) / tau);
    }
    i2t += -std::log(std::exp(sim(i, i) / tau) / row);
    t2i += -std::log(std::exp(sim(i, i) / tau) / col);
  }
  i2t /= double(n);
  t2i /= double(n);
  return symmetric ? 0.5 * (i2t + t2i) : i2t;
}

TEST(ClipLoss, EqualSimilaritiesGiveLogN) {
  for (std::size_t n : {2u, 4u, 8u}) {
    Tensor<double> u({n, 3});
    for (std::size_t i = 0; i < n; ++i) u(i, 0) = 1.0;
    for (bool sym : {true, false}) EXPECT_NEAR(clip_loss(u, u, 0.07, sym).loss, std::log(double(n)), 1e-9);
  }
}

TEST(ClipLoss, OrthonormalClosedForm) {
  Tensor<double> u({3, 3});
  for (std::size_t i = 0; i < 3; ++i) u(i, i) = 1.0;
  const double expected = std::log(1.0 + 2.0 * std::exp(-1.0 / 0.07));
  EXPECT_NEAR(clip_loss(u, u, 0.07, false).loss, expected, 1e-15);
  EXPECT_NEAR(expected, 1.2e-6, 1e-7);
}

TEST(ClipLoss, MatchesBruteForce) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto u = testkit::unit_rows(testkit::random_matrix(4, 8, rng));
    const auto v = testkit::unit_rows(testkit::random_matrix(4, 8, rng));
    for (bool sym : {true, false})
      EXPECT_NEAR(clip_loss(u, v, 0.07, sym).loss, brute_force_clip(u, v, 0.07, sym), 1e-10);
  }
}

TEST(ClipLoss, NonNegativeAndPermutationEquivariant) {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const auto u = testkit::unit_rows(testkit::random_matrix(6, 5, rng));
    const auto v = testkit::unit_rows(testkit::random_matrix(6, 5, rng));
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    Tensor<double> up({6, 5}), vp({6, 5});
    for (std::size_t i = 0; i < 6; ++i) {
      std::copy(u.row(perm[i]).begin(), u.row(perm[i]).end(), up.row(i).begin());
      std::copy(v.row(perm[i]).begin(), v.row(perm[i]).end(), vp.row(i).begin());
    }
    for (bool sym : {true, false}) {
      const double l = clip_loss(u, v, 0.07, sym).loss;
      EXPECT_GE(l, -1e-12);
      EXPECT_NEAR(l, clip_loss(up, vp, 0.07, sym).loss, 1e-12);
    }
  }
}

TEST(ClipLoss, Preconditions) {
  Tensor<double> u({2, 2}, std::vector<double>{1, 0, 0, 2});
  EXPECT_THROW(clip_loss(u, u, 0.07), PreconditionError);
  const auto ok = testkit::unit_rows(u);
  EXPECT_THROW(clip_loss(ok, ok, 0.0), ParameterError);
  EXPECT_THROW(clip_loss(ok, Tensor<double>({2, 3}), 0.07), ParameterError);
}

TEST(ClipLoss, GradientsBothModes) {
  for (std::uint64_t s = 0; s < 10; ++s)
    for (bool sym : {true, false}) {
      const auto r = pipeline::check_clip_gradient(derive_seed(100, s), sym);
      EXPECT_TRUE(r.report.passed) << r.name << " err " << r.report.max_rel_error;
    }
}

TEST(Batches, EpochCoversEveryRecordOnce) {
  Rng a(3), b(3);
  const auto x = contrastive::epoch_batches(101, 10, a);
  EXPECT_EQ(x, contrastive::epoch_batches(101, 10, b));
  std::vector<std::size_t> seen;
  for (const auto& batch : x) {
    EXPECT_GE(batch.size(), 2u);
    seen.insert(seen.end(), batch.begin(), batch.end());
  }
  std::sort(seen.begin(), seen.end());
  std::vector<std::size_t> all(101);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(seen, all);
}

TEST(Batches, FullSizeSampleIsPermutation) {
  std::vector<corpus::SampleRecord> recs(12);
  std::vector<const corpus::SampleRecord*> ptrs;
  for (auto& r : recs) {
    r.prompts = {"a photo of a leaf"};
    ptrs.push_back(&r);
  }
  const auto vocab = corpus::build_vocab(ptrs);
  Rng rng(9);
  auto b = contrastive::sample_batch(ptrs, vocab, 12, rng);
  std::sort(b.indices.begin(), b.indices.end());
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(b.indices[i], i);
  EXPECT_THROW(contrastive::sample_batch(ptrs, vocab, 13, rng), ConfigError);
}

class ContrastiveTraining : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    auto spec = corpus::default_corpus_spec(3);
    std::erase_if(spec.classes, [&](const corpus::ClassDef& c) { return spec.heldout_datasets.contains(c.dataset_name); });
    spec.heldout_datasets.clear();
    spec.images_per_class = 100;
    manifest_ = new corpus::Manifest(corpus::build_corpus(spec, testkit::scratch_dir("contrastive_corpus")));
    train_ = new corpus::LoadedSplit(corpus::load_split(*manifest_, corpus::Split::Train));
    vocab_ = new corpus::Vocab(corpus::build_vocab(train_->records));
  }
  static void TearDownTestSuite() {
    delete vocab_;
    delete train_;
    delete manifest_;
  }
  static encoders::EncoderConfig image() {
    encoders::EncoderConfig c;
    c.init_seed = 1;
    return c;
  }
  static encoders::EncoderConfig text() {
    encoders::EncoderConfig c;
    c.kind = encoders::EncoderKind::Text;
    c.vocab_size = vocab_->size();
    c.init_seed = 2;
    return c;
  }
  static corpus::Manifest* manifest_;
  static corpus::LoadedSplit* train_;
  static corpus::Vocab* vocab_;
};
corpus::Manifest* ContrastiveTraining::manifest_ = nullptr;
corpus::LoadedSplit* ContrastiveTraining::train_ = nullptr;
corpus::Vocab* ContrastiveTraining::vocab_ = nullptr;

TEST_F(ContrastiveTraining, ZeroEpochsReturnsInit) {
  contrastive::ContrastiveConfig cfg;
  cfg.epochs = 0;
  const auto r = contrastive::train_contrastive(*train_, *vocab_, cfg, image(), text());
  EXPECT_EQ(r.image, encoders::init_params<float>(image()));
  EXPECT_EQ(r.text, encoders::init_params<float>(text()));
  EXPECT_TRUE(r.epoch_loss.empty());
}

TEST_F(ContrastiveTraining, LossFallsAndRunsRepeat) {
  ASSERT_EQ(manifest_->records.size(), 1200u);
  contrastive::ContrastiveConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 17;
  const auto a = contrastive::train_contrastive(*train_, *vocab_, cfg, image(), text());
  ASSERT_EQ(a.epoch_loss.size(), 10u);
  EXPECT_LT(a.epoch_loss.back(), a.epoch_loss.front());
  cfg.epochs = 2;
  const auto b = contrastive::train_contrastive(*train_, *vocab_, cfg, image(), text());
  const auto c = contrastive::train_contrastive(*train_, *vocab_, cfg, image(), text());
  EXPECT_EQ(b.image, c.image);
  EXPECT_EQ(b.text, c.text);
  EXPECT_EQ(b.epoch_loss, c.epoch_loss);
}

TEST_F(ContrastiveTraining, ConfigErrors) {
  contrastive::ContrastiveConfig cfg;
  cfg.batch_size = 1;
  EXPECT_THROW(contrastive::train_contrastive(*train_, *vocab_, cfg, image(), text()), ConfigError);
  cfg = {};
  auto t = text();
  t.vocab_size += 1;
  EXPECT_THROW(contrastive::train_contrastive(*train_, *vocab_, cfg, image(), t), ConfigError);
}

}  // namespace
