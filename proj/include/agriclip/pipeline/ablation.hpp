#pragma once

#include <string>
#include <vector>

#include "agriclip/pipeline/stages.hpp"

namespace agriclip::pipeline {

struct PromptAblationRow {
  std::uint64_t seed = 0;
  corpus::PromptMode mode = corpus::PromptMode::Generic;
  align::ZeroShotReport report;
};

// Per seed: two stage-1 + clip_only eval runs that differ only in prompt mode.
// Runs live under <base run>/ablate_prompts/seed_<s>/<mode>/.
inline std::vector<PromptAblationRow> ablate_prompts(
    const RunConfig& base, const std::vector<std::uint64_t>& seeds,
    const corpus::PromptTemplates& templates = corpus::PromptTemplates::defaults()) {
  validate(base);
  if (seeds.empty()) throw ConfigError("ablate_prompts: no seeds");
  std::vector<PromptAblationRow> rows;
  for (auto seed : seeds) {
    for (auto mode : {corpus::PromptMode::Generic, corpus::PromptMode::Custom}) {
      RunConfig c = base;
      c.master_seed = seed;
      c.prompt_mode = mode;
      c.output_dir = base.run_dir() / "ablate_prompts" / ("seed_" + std::to_string(seed));
      c.run_id = std::string(corpus::to_string(mode));
      const auto corpus = gen_corpus(c, templates);
      train_stage1(c, corpus::load_split(corpus.manifest, corpus::Split::Train), corpus.vocab);
      rows.push_back({seed, mode, run_eval(c, {align::PipelineKind::ClipOnly}).front()});
    }
  }

  std::vector<std::string> datasets;
  for (const auto& [name, _] : rows.front().report.per_dataset) datasets.push_back(name);
  std::string csv = "seed,mode,average";
  for (const auto& d : datasets) csv += "," + d;
  csv += "\n";
  for (const auto& r : rows) {
    csv += std::to_string(r.seed) + "," + std::string(corpus::to_string(r.mode)) + "," + format_double(r.report.average);
    for (const auto& d : datasets) csv += "," + format_double(r.report.per_dataset.at(d).accuracy);
    csv += "\n";
  }
  std::string deltas = "seed,generic,custom,delta\n";
  for (std::size_t i = 0; i + 1 < rows.size(); i += 2)
    deltas += std::to_string(rows[i].seed) + "," + format_double(rows[i].report.average) + "," +
              format_double(rows[i + 1].report.average) + "," +
              format_double(rows[i + 1].report.average - rows[i].report.average) + "\n";
  ensure_dir(base.run_dir());
  io::write_text(base.run_dir() / "ablate_prompts.csv", csv);
  io::write_text(base.run_dir() / "ablate_prompts_delta.csv", deltas);
  return rows;
}

struct SizeAblationRow {
  std::size_t factor = 1;
  std::size_t images_per_class = 0;
  align::ZeroShotReport report;  // aligned pipeline
};

// Scales the corpus used by stage 2 only. Stage 1, the alignment fitting data
// and the eval split stay those of the baseline run, which is produced first
// if its artifacts are missing.
inline std::vector<SizeAblationRow> ablate_size(const RunConfig& base, const std::vector<std::size_t>& factors) {
  validate(base);
  if (factors.empty()) throw ConfigError("ablate_size: no factors");
  for (auto f : factors)
    if (f < 1) throw ConfigError("ablate_size: factors must be integers >= 1");

  bool have_baseline = true;
  for (const auto& p : run_artifacts(base)) have_baseline = have_baseline && fs::exists(p);
  if (!have_baseline) run_all(base);

  const auto corpus = load_corpus(base);
  const auto train = corpus::load_split(corpus.manifest, corpus::Split::Train);
  const auto eval = corpus::load_split(corpus.manifest, corpus::Split::Eval);
  const auto s1 = contrastive_weights(load_stage_checkpoint(base, stage1_checkpoint_path(base), StageTag::Contrastive));

  std::vector<SizeAblationRow> rows;
  for (auto f : factors) {
    RunConfig c = base;
    c.images_per_class = base.images_per_class * f;
    c.output_dir = base.run_dir() / "ablate_size";
    c.run_id = "factor_" + std::to_string(f);
    prepare_run_dir(c);
    auto spec = corpus_spec(c);
    // Held-out datasets never feed stage 2; leave them out of the scaled corpus.
    std::erase_if(spec.classes, [&](const corpus::ClassDef& cls) { return spec.heldout_datasets.contains(cls.dataset_name); });
    spec.heldout_datasets.clear();
    const auto scaled = corpus::build_corpus(spec, c.corpus_dir());
    const auto s2 = train_stage2(c, corpus::load_split(scaled, corpus::Split::Train));
    const auto map = fit_stage3(c, s2.teacher.backbone, s1.image, train);
    auto report = evaluate_split(c, align::PipelineKind::Aligned, eval, corpus.vocab, s1, &s2.teacher.backbone, &map);
    write_report(c, report);
    rows.push_back({f, c.images_per_class, std::move(report)});
  }

  std::vector<std::string> datasets;
  for (const auto& [name, _] : rows.front().report.per_dataset) datasets.push_back(name);
  std::string csv = "factor,images_per_class,average";
  for (const auto& d : datasets) csv += "," + d;
  csv += "\n";
  for (const auto& r : rows) {
    csv += std::to_string(r.factor) + "," + std::to_string(r.images_per_class) + "," + format_double(r.report.average);
    for (const auto& d : datasets) csv += "," + format_double(r.report.per_dataset.at(d).accuracy);
    csv += "\n";
  }
  io::write_text(base.run_dir() / "ablate_size.csv", csv);
  return rows;
}

}  // namespace agriclip::pipeline
