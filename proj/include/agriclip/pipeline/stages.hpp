#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "agriclip/align/affine.hpp"
#include "agriclip/align/zeroshot.hpp"
#include "agriclip/contrastive/trainer.hpp"
#include "agriclip/corpus/build.hpp"
#include "agriclip/corpus/dataset.hpp"
#include "agriclip/corpus/vocab.hpp"
#include "agriclip/distill/trainer.hpp"
#include "agriclip/pipeline/checkpoint.hpp"
#include "agriclip/pipeline/config.hpp"

namespace agriclip::pipeline {

namespace fs = std::filesystem;

inline fs::path manifest_path(const RunConfig& c) { return c.corpus_dir() / "manifest.jsonl"; }
inline fs::path vocab_path(const RunConfig& c) { return c.corpus_dir() / "vocab.tsv"; }
inline fs::path stage1_checkpoint_path(const RunConfig& c) { return c.checkpoint_dir() / "stage1_contrastive.agc"; }
inline fs::path stage2_checkpoint_path(const RunConfig& c) { return c.checkpoint_dir() / "stage2_distill.agc"; }
inline fs::path stage3_checkpoint_path(const RunConfig& c) { return c.checkpoint_dir() / "stage3_align.agc"; }
inline fs::path stage1_loss_path(const RunConfig& c) { return c.run_dir() / "stage1_loss.csv"; }
inline fs::path stage2_loss_path(const RunConfig& c) { return c.run_dir() / "stage2_loss.csv"; }
inline fs::path report_path(const RunConfig& c, align::PipelineKind k, const char* ext) {
  return c.report_dir() / ("zeroshot_" + std::string(align::to_string(k)) + ext);
}

inline void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create '" + p.string() + "': " + ec.message());
}

// Writes the resolved config next to the artifacts it produced.
inline void prepare_run_dir(const RunConfig& c) {
  validate(c);
  ensure_dir(c.run_dir());
  io::write_text(c.run_dir() / "resolved.cfg", canonical_text(c));
}

inline Checkpoint load_stage_checkpoint(const RunConfig& c, const fs::path& path, StageTag tag) {
  if (!fs::exists(path))
    throw ConfigError("missing " + std::string(to_string(tag)) + " checkpoint '" + path.string() + "'");
  auto ck = load_checkpoint(path, tag);
  const auto digest = config_digest(c);
  if (ck.config_digest != digest)
    throw ConfigError(path.string() + ": config digest " + ck.config_digest + " does not match the current config (" +
                      digest + ")");
  return ck;
}

// ---- corpus ---------------------------------------------------------------

struct CorpusArtifacts {
  corpus::Manifest manifest;
  corpus::Vocab vocab;
};

inline CorpusArtifacts gen_corpus(const RunConfig& c,
                                  const corpus::PromptTemplates& templates = corpus::PromptTemplates::defaults()) {
  prepare_run_dir(c);
  auto manifest = corpus::build_corpus(corpus_spec(c), c.corpus_dir(), templates);
  auto vocab = corpus::build_vocab(manifest.split(corpus::Split::Train));
  corpus::save_vocab(vocab, vocab_path(c));
  return {std::move(manifest), std::move(vocab)};
}

inline CorpusArtifacts load_corpus(const RunConfig& c) {
  if (!fs::exists(manifest_path(c))) throw ConfigError("missing manifest '" + manifest_path(c).string() + "'");
  return {corpus::load_manifest(manifest_path(c)), corpus::load_vocab(vocab_path(c))};
}

// ---- stage 1 --------------------------------------------------------------

inline contrastive::ContrastiveResult train_stage1(const RunConfig& c, const corpus::LoadedSplit& train,
                                                   const corpus::Vocab& vocab) {
  auto cfg = c.contrastive;
  cfg.seed = stage_seed(c, "contrastive");
  auto r = contrastive::train_contrastive(train, vocab, cfg, image_encoder_config(c),
                                          text_encoder_config(c, vocab.size()));
  ensure_dir(c.checkpoint_dir());
  save_checkpoint(contrastive_checkpoint(r.image, r.text, c.run_id, config_digest(c)), stage1_checkpoint_path(c));
  std::string csv = "epoch,mean_loss\n";
  for (std::size_t e = 0; e < r.epoch_loss.size(); ++e)
    csv += std::to_string(e + 1) + "," + format_double(r.epoch_loss[e]) + "\n";
  io::write_text(stage1_loss_path(c), csv);
  return r;
}

inline contrastive::ContrastiveResult train_stage1(const RunConfig& c) {
  prepare_run_dir(c);
  const auto corpus = load_corpus(c);
  return train_stage1(c, corpus::load_split(corpus.manifest, corpus::Split::Train), corpus.vocab);
}

// ---- stage 2 --------------------------------------------------------------

inline distill::DistillResult train_stage2(const RunConfig& c, const corpus::LoadedSplit& train) {
  auto cfg = c.distill;
  cfg.seed = stage_seed(c, "distill");
  auto r = distill::train_distill(train, cfg, fine_encoder_config(c));
  ensure_dir(c.checkpoint_dir());
  save_checkpoint(distill_checkpoint(r, c.run_id, config_digest(c)), stage2_checkpoint_path(c));
  std::string csv = "epoch,mean_loss,teacher_entropy\n";
  for (std::size_t e = 0; e < r.history.size(); ++e)
    csv += std::to_string(e + 1) + "," + format_double(r.history[e].mean_loss) + "," +
           format_double(r.history[e].teacher_entropy) + "\n";
  io::write_text(stage2_loss_path(c), csv);
  return r;
}

inline distill::DistillResult train_stage2(const RunConfig& c) {
  prepare_run_dir(c);
  const auto corpus = load_corpus(c);
  return train_stage2(c, corpus::load_split(corpus.manifest, corpus::Split::Train));
}

// ---- stage 3 --------------------------------------------------------------

// Fits E^S features onto E_img features over the training split. The map is
// returned as stored (float32), so in-memory and reloaded evaluation agree.
inline align::AffineMap fit_stage3(const RunConfig& c, const encoders::EncoderParams<float>& fine,
                                   const encoders::EncoderParams<float>& image, const corpus::LoadedSplit& train) {
  const auto x = align::extract_features(fine, train);
  const auto y = align::extract_features(image, train);
  align::AffineMap map;
  if (c.align.method == AlignMethod::Ridge) {
    map = align::fit_affine_ridge(x, y, c.align.lambda);
  } else {
    const double lr = 1.0 / align::affine_lipschitz(x, c.align.lambda);
    map = align::fit_affine_sgd(x, y, lr, c.align.sgd_steps, c.align.lambda).map;
  }
  const auto ck = align_checkpoint(map, c.run_id, config_digest(c));
  ensure_dir(c.checkpoint_dir());
  save_checkpoint(ck, stage3_checkpoint_path(c));
  return affine_map(ck);
}

inline align::AffineMap fit_stage3(const RunConfig& c) {
  prepare_run_dir(c);
  const auto corpus = load_corpus(c);
  const auto s1 = contrastive_weights(load_stage_checkpoint(c, stage1_checkpoint_path(c), StageTag::Contrastive));
  const auto fine = fine_encoder(load_stage_checkpoint(c, stage2_checkpoint_path(c), StageTag::Distill));
  return fit_stage3(c, fine, s1.image, corpus::load_split(corpus.manifest, corpus::Split::Train));
}

// ---- evaluation -----------------------------------------------------------

inline std::map<std::string, align::ConceptBank> concept_banks(const encoders::EncoderParams<float>& text,
                                                               const corpus::Vocab& vocab,
                                                               const std::vector<const corpus::SampleRecord*>& records) {
  std::map<std::string, align::ConceptBank> banks;
  for (const auto& d : corpus::datasets_of(records))
    banks.emplace(d.dataset_name, align::build_clip_concept_bank(text, vocab, d.class_names));
  return banks;
}

// clip_only: E_img features against the concept banks. aligned: E^S features
// mapped through the affine map. Both run over the full eval split.
inline align::ZeroShotReport evaluate_split(const RunConfig& c, align::PipelineKind kind,
                                            const corpus::LoadedSplit& eval, const corpus::Vocab& vocab,
                                            const ContrastiveWeights& s1, const encoders::EncoderParams<float>* fine,
                                            const align::AffineMap* map) {
  const auto banks = concept_banks(s1.text, vocab, eval.records);
  const auto items = align::eval_items(eval.records);
  if (kind == align::PipelineKind::ClipOnly)
    return align::evaluate(items, align::extract_features(s1.image, eval), nullptr, banks, kind, c.run_id);
  if (!fine || !map) throw ConfigError("aligned evaluation needs the fine-grained encoder and the affine map");
  return align::evaluate(items, align::extract_features(*fine, eval), map, banks, kind, c.run_id);
}

inline std::string report_json(const align::ZeroShotReport& r) {
  nlohmann::ordered_json j;
  j["run_id"] = r.run_id;
  j["pipeline"] = r.pipeline;
  j["per_dataset"] = nlohmann::ordered_json::object();
  for (const auto& [name, s] : r.per_dataset) j["per_dataset"][name] = s.accuracy;
  j["average"] = r.average;
  j["sample_count"] = r.sample_ids.size();
  return j.dump(2) + "\n";
}

inline std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

inline std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

inline std::string lpad(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

// One accuracy column per report, one row per dataset plus "Average".
inline std::string report_table(const std::vector<align::ZeroShotReport>& reports) {
  if (reports.empty()) return {};
  std::string out = pad("dataset", 22);
  for (const auto& r : reports) out += lpad(r.pipeline, 12);
  out += "\n";
  for (const auto& [name, _] : reports.front().per_dataset) {
    out += pad(name, 22);
    for (const auto& r : reports) {
      auto it = r.per_dataset.find(name);
      out += lpad(it == r.per_dataset.end() ? "-" : percent(it->second.accuracy), 12);
    }
    out += "\n";
  }
  out += pad("Average", 22);
  for (const auto& r : reports) out += lpad(percent(r.average), 12);
  return out + "\n";
}

inline void write_report(const RunConfig& c, const align::ZeroShotReport& r) {
  ensure_dir(c.report_dir());
  const auto kind = r.pipeline == "clip_only" ? align::PipelineKind::ClipOnly : align::PipelineKind::Aligned;
  io::write_text(report_path(c, kind, ".json"), report_json(r));
  io::write_text(report_path(c, kind, ".txt"), "run_id: " + r.run_id + "\n" + report_table({r}));
}

inline std::vector<align::ZeroShotReport> run_eval(const RunConfig& c, const std::vector<align::PipelineKind>& kinds) {
  prepare_run_dir(c);
  const auto corpus = load_corpus(c);
  const auto eval = corpus::load_split(corpus.manifest, corpus::Split::Eval);
  const auto s1 = contrastive_weights(load_stage_checkpoint(c, stage1_checkpoint_path(c), StageTag::Contrastive));
  std::optional<encoders::EncoderParams<float>> fine;
  std::optional<align::AffineMap> map;
  std::vector<align::ZeroShotReport> reports;
  for (auto kind : kinds) {
    if (kind == align::PipelineKind::Aligned && !fine) {
      fine = fine_encoder(load_stage_checkpoint(c, stage2_checkpoint_path(c), StageTag::Distill));
      map = affine_map(load_stage_checkpoint(c, stage3_checkpoint_path(c), StageTag::Align));
    }
    reports.push_back(evaluate_split(c, kind, eval, corpus.vocab, s1, fine ? &*fine : nullptr, map ? &*map : nullptr));
    write_report(c, reports.back());
  }
  if (reports.size() > 1) io::write_text(c.report_dir() / "zeroshot_table.txt", report_table(reports));
  return reports;
}

// ---- end to end -----------------------------------------------------------

struct RunSummary {
  std::vector<align::ZeroShotReport> reports;  // clip_only, aligned
  std::vector<distill::DistillEpoch> distill_history;
  std::vector<double> contrastive_loss;
};

inline RunSummary run_all(const RunConfig& c) {
  const auto corpus = gen_corpus(c);
  const auto train = corpus::load_split(corpus.manifest, corpus::Split::Train);
  RunSummary s;
  const auto s1 = train_stage1(c, train, corpus.vocab);
  s.contrastive_loss = s1.epoch_loss;
  const auto s2 = train_stage2(c, train);
  s.distill_history = s2.history;
  fit_stage3(c, s2.teacher.backbone, s1.image, train);
  // Evaluation goes through the files on disk, like the eval subcommand.
  s.reports = run_eval(c, {align::PipelineKind::ClipOnly, align::PipelineKind::Aligned});
  return s;
}

// Files run-all must leave behind.
inline std::vector<fs::path> run_artifacts(const RunConfig& c) {
  using align::PipelineKind;
  return {manifest_path(c),
          vocab_path(c),
          stage1_checkpoint_path(c),
          stage2_checkpoint_path(c),
          stage3_checkpoint_path(c),
          stage1_loss_path(c),
          stage2_loss_path(c),
          report_path(c, PipelineKind::ClipOnly, ".json"),
          report_path(c, PipelineKind::Aligned, ".json")};
}

}  // namespace agriclip::pipeline
