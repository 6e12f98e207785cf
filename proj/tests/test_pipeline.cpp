#include <gtest/gtest.h>

#include <fstream>

#include "agriclip/pipeline/ablation.hpp"
#include "agriclip/pipeline/checkpoint.hpp"
#include "agriclip/pipeline/config.hpp"
#include "agriclip/pipeline/gradient_suite.hpp"
#include "agriclip/pipeline/stages.hpp"
#include "test_support.hpp"

namespace {

using namespace agriclip;
using namespace agriclip::pipeline;
namespace fs = std::filesystem;

TEST(Config, ParseCommentsAndErrors) {
  const auto kv = parse_key_values("# header\n  distill.epochs = 5  # trailing\n\nalign.lambda=0.01\n");
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv.at("distill.epochs"), "5");
  RunConfig c;
  apply_overrides(c, kv);
  EXPECT_EQ(c.distill.epochs, 5u);
  EXPECT_EQ(c.align.lambda, 0.01);
  EXPECT_THROW(parse_key_values("no equals sign\n"), ConfigError);
  EXPECT_THROW(parse_key_values(" = 3\n"), ConfigError);
  EXPECT_THROW(apply_overrides(c, {{"distill.epoch", "5"}}), ConfigError);
  EXPECT_THROW(apply_overrides(c, {{"distill.epochs", "-1"}}), ConfigError);
  EXPECT_THROW(apply_overrides(c, {{"align.lambda", "abc"}}), ConfigError);
  EXPECT_THROW(apply_overrides(c, {{"align.method", "lbfgs"}}), ConfigError);
  EXPECT_THROW(apply_overrides(c, {{"contrastive.symmetric", "yes"}}), ConfigError);
}

TEST(Config, CanonicalTextRoundTripsAndDigestTracksChanges) {
  RunConfig a;
  a.distill.unit_prototypes = true;
  a.align.method = AlignMethod::Sgd;
  RunConfig b;
  apply_overrides(b, parse_key_values(canonical_text(a)));
  EXPECT_EQ(canonical_text(a), canonical_text(b));
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.contrastive.lr *= 2;
  EXPECT_NE(config_digest(a), config_digest(b));
}

TEST(Config, ShippedDefaultFileMatchesBuiltInDefaults) {
  const auto c = load_run_config(fs::path(AGRICLIP_SOURCE_DIR) / "configs" / "default.cfg");
  EXPECT_EQ(canonical_text(c), canonical_text(RunConfig{}));
}

TEST(Config, Validation) {
  RunConfig c;
  EXPECT_NO_THROW(validate(c));
  c.distill.teacher_temperature = 0.5;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.run_id.clear();
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, StageSeedsDifferAndRepeat) {
  RunConfig c;
  c.master_seed = 3;
  EXPECT_EQ(stage_seed(c, "distill"), stage_seed(c, "distill"));
  EXPECT_NE(stage_seed(c, "distill"), stage_seed(c, "contrastive"));
  RunConfig d = c;
  d.master_seed = 4;
  EXPECT_NE(stage_seed(c, "distill"), stage_seed(d, "distill"));
}

Checkpoint sample_checkpoint() {
  encoders::EncoderConfig e;
  e.image_height = e.image_width = 16;
  e.d_model = 4;
  e.hidden = 6;
  e.d_out = 8;
  e.init_seed = 0xdeadbeefcafef00dULL;
  Checkpoint ck = contrastive_checkpoint(encoders::init_params<float>(e),
                                         [] {
                                           encoders::EncoderConfig t;
                                           t.kind = encoders::EncoderKind::Text;
                                           t.vocab_size = 7;
                                           t.d_model = 4;
                                           t.hidden = 6;
                                           t.d_out = 8;
                                           return encoders::init_params<float>(t);
                                         }(),
                                         "ck_run", "0123456789abcdef");
  ck.tensors.front().value[0] = -0.0f;
  ck.tensors.front().value[1] = 1e-38f;
  return ck;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto ck = sample_checkpoint();
  const auto bytes = encode_checkpoint(ck);
  const auto back = decode_checkpoint(bytes, "mem");
  EXPECT_EQ(back, ck);
  EXPECT_EQ(encode_checkpoint(back), bytes);
  EXPECT_TRUE(std::signbit(back.tensors.front().value[0]));
  const auto w = contrastive_weights(back);
  EXPECT_EQ(w.image.config.init_seed, 0xdeadbeefcafef00dULL);
}

TEST(Checkpoint, RejectsCorruption) {
  const auto bytes = encode_checkpoint(sample_checkpoint());
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad, "mem"), FormatError);

  bad = bytes;
  bad[4] = 2;  // version
  EXPECT_THROW(decode_checkpoint(bad, "mem"), FormatError);

  bad = bytes;
  bad[6] = 9;  // stage tag
  EXPECT_THROW(decode_checkpoint(bad, "mem"), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes, "mem", StageTag::Align), FormatError);

  for (std::size_t cut : {std::size_t{5}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<unsigned char> trunc(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    try {
      decode_checkpoint(trunc, "mem");
      ADD_FAILURE() << "truncation at " << cut << " accepted";
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
    }
  }
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(decode_checkpoint(bad, "mem"), FormatError);
}

TEST(Checkpoint, AlignRoundTrip) {
  align::AffineMap m{Tensor<double>({3, 2}, std::vector<double>{1, 2, 3, 4, 5, 6}),
                     Tensor<double>({2}, std::vector<double>{-1, 0.5})};
  const auto back = affine_map(decode_checkpoint(encode_checkpoint(align_checkpoint(m, "r", "d")), "mem"));
  EXPECT_EQ(back.weight, m.weight);
  EXPECT_EQ(back.bias, m.bias);
}

class TinyRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = new RunConfig(testkit::tiny_run(testkit::scratch_dir("tiny_run"), "a"));
    summary_ = new RunSummary(run_all(*cfg_));
  }
  static void TearDownTestSuite() {
    delete summary_;
    delete cfg_;
  }
  static RunConfig* cfg_;
  static RunSummary* summary_;
};
RunConfig* TinyRun::cfg_ = nullptr;
RunSummary* TinyRun::summary_ = nullptr;

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST_F(TinyRun, ArtifactsAndReports) {
  for (const auto& p : run_artifacts(*cfg_)) EXPECT_TRUE(fs::exists(p)) << p;
  ASSERT_EQ(summary_->reports.size(), 2u);
  EXPECT_EQ(summary_->reports[0].pipeline, "clip_only");
  EXPECT_EQ(summary_->reports[1].pipeline, "aligned");
  EXPECT_EQ(summary_->reports[0].sample_ids, summary_->reports[1].sample_ids);
  EXPECT_EQ(summary_->reports[0].per_dataset.size(), 3u);
  EXPECT_EQ(summary_->contrastive_loss.size(), cfg_->contrastive.epochs);
  EXPECT_EQ(summary_->distill_history.size(), cfg_->distill.epochs);
}

TEST_F(TinyRun, StagesRerunFromDisk) {
  auto c = *cfg_;
  const auto map = fit_stage3(c);
  const auto stored = affine_map(load_checkpoint(stage3_checkpoint_path(c)));
  EXPECT_EQ(map.weight, stored.weight);
  const auto reports = run_eval(c, {align::PipelineKind::Aligned});
  EXPECT_EQ(reports.front().average, summary_->reports[1].average);
}

TEST_F(TinyRun, DigestMismatchIsRejected) {
  auto c = *cfg_;
  c.align.lambda = 0.5;
  EXPECT_THROW(fit_stage3(c), ConfigError);
}

TEST_F(TinyRun, ByteIdenticalRerun) {
  const auto again = testkit::tiny_run(testkit::scratch_dir("tiny_run_again"), "a");
  run_all(again);
  const auto a = run_artifacts(*cfg_), b = run_artifacts(again);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].extension() == ".agc") continue;  // metadata names the output dir via the digest
    EXPECT_EQ(file_bytes(a[i]), file_bytes(b[i])) << a[i].filename();
  }
  for (auto* ck : {&stage1_checkpoint_path, &stage2_checkpoint_path, &stage3_checkpoint_path}) {
    const auto x = load_checkpoint((*ck)(*cfg_)), y = load_checkpoint((*ck)(again));
    EXPECT_EQ(x.tensors, y.tensors);
  }
}

TEST(Ablation, PromptRowsAndDegenerateControl) {
  auto c = testkit::tiny_run(testkit::scratch_dir("ablate_prompts"), "base");
  const auto rows = ablate_prompts(c, {1, 2});
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].mode, corpus::PromptMode::Generic);
  EXPECT_EQ(rows[1].mode, corpus::PromptMode::Custom);
  EXPECT_TRUE(fs::exists(c.run_dir() / "ablate_prompts_delta.csv"));

  auto same = corpus::PromptTemplates::defaults();
  same.generic = same.custom;
  const auto control = ablate_prompts(c, {1}, same);
  ASSERT_EQ(control.size(), 2u);
  EXPECT_EQ(control[0].report.average, control[1].report.average);
  EXPECT_THROW(ablate_prompts(c, {}), ConfigError);
}

TEST(Ablation, SizeFactorOneReproducesBaseline) {
  auto c = testkit::tiny_run(testkit::scratch_dir("ablate_size"), "base");
  const auto rows = ablate_size(c, {1, 2});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].images_per_class, 2 * c.images_per_class);
  const auto baseline = run_eval(c, {align::PipelineKind::Aligned}).front();
  EXPECT_EQ(rows[0].report.average, baseline.average);
  EXPECT_THROW(ablate_size(c, {0}), ConfigError);
}

TEST(GradientSuite, AllCasesPass) {
  const auto cases = run_gradient_suite(10, 7);
  EXPECT_EQ(cases.size(), 60u);
  for (const auto& c : cases) EXPECT_TRUE(c.report.passed) << c.name << " " << c.report.max_rel_error;
}

}  // namespace
