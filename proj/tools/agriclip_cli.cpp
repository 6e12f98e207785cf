#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agriclip/agriclip.hpp"

namespace {

using namespace agriclip;
using pipeline::RunConfig;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "config file of key = value lines");
  cmd->add_option("-s,--set", args.overrides, "override a config key, e.g. --set distill.epochs=5");
}

RunConfig resolve(const CommonArgs& args) {
  RunConfig c;
  if (!args.config_path.empty())
    pipeline::apply_overrides(c, pipeline::parse_key_values(io::read_text(args.config_path), args.config_path));
  pipeline::KeyValues kv;
  for (const auto& o : args.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
    kv[pipeline::trim(std::string_view(o).substr(0, eq))] = pipeline::trim(std::string_view(o).substr(eq + 1));
  }
  pipeline::apply_overrides(c, kv);
  pipeline::validate(c);
  return c;
}

void print_reports(const std::vector<align::ZeroShotReport>& reports) {
  std::cout << pipeline::report_table(reports);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agriclip: synthetic three-stage contrastive, distillation and alignment pipeline"};
  app.require_subcommand(1);
  CommonArgs common;

  auto* gen = app.add_subcommand("gen-corpus", "render the synthetic corpus, manifest and vocabulary");
  auto* s1 = app.add_subcommand("train-contrastive", "stage 1: image-text contrastive pretraining");
  auto* s2 = app.add_subcommand("train-distill", "stage 2: self-distillation of the fine-grained encoder");
  auto* s3 = app.add_subcommand("fit-align", "stage 3: affine map from fine-grained to semantic features");
  auto* ev = app.add_subcommand("eval", "zero-shot evaluation on the eval split");
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  auto* ap = app.add_subcommand("ablate-prompts", "generic vs custom prompts, stage 1 + eval per seed");
  auto* as = app.add_subcommand("ablate-size", "scale the stage-2 corpus, rerun stages 2-3 + eval");
  auto* all = app.add_subcommand("run-all", "corpus, all three stages and both evaluations");
  for (auto* cmd : {gen, s1, s2, s3, ev, ap, as, all}) add_common(cmd, common);

  std::string pipeline_sel = "both";
  ev->add_option("--pipeline", pipeline_sel, "clip_only, aligned or both")
      ->check(CLI::IsMember({"clip_only", "aligned", "both"}));
  std::size_t grad_seeds = 10;
  std::uint64_t grad_base = 0;
  gc->add_option("--seeds", grad_seeds, "number of random seeds per check")->check(CLI::PositiveNumber);
  gc->add_option("--base-seed", grad_base, "seed the per-case seeds are derived from");
  std::vector<std::uint64_t> ablation_seeds = {1, 2, 3, 4, 5};
  ap->add_option("--seeds", ablation_seeds, "master seeds")->delimiter(',');
  std::vector<std::size_t> factors = {1, 2, 4};
  as->add_option("--factors", factors, "images-per-class multipliers")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "\n" << app.help();
    return 2;
  }

  try {
    if (*gc) {
      bool ok = true;
      for (const auto& c : pipeline::run_gradient_suite(grad_seeds, grad_base)) {
        std::printf("%-22s seed=%016llx max_rel_err=%.3e %s\n", c.name.c_str(),
                    static_cast<unsigned long long>(c.seed), c.report.max_rel_error, c.report.passed ? "ok" : "FAIL");
        ok = ok && c.report.passed;
      }
      return ok ? 0 : 1;
    }

    const RunConfig cfg = resolve(common);
    if (*gen) {
      const auto corpus = pipeline::gen_corpus(cfg);
      std::cout << "wrote " << corpus.manifest.records.size() << " records and " << corpus.vocab.size()
                << " vocabulary entries to " << cfg.corpus_dir().string() << "\n";
    } else if (*s1) {
      const auto r = pipeline::train_stage1(cfg);
      if (r.epoch_loss.empty()) std::cout << "stage 1 ran zero epochs\n";
      else std::cout << "stage 1 final loss " << r.epoch_loss.back() << "\n";
    } else if (*s2) {
      const auto r = pipeline::train_stage2(cfg);
      if (r.history.empty()) std::cout << "stage 2 ran zero epochs\n";
      else std::cout << "stage 2 final loss " << r.history.back().mean_loss << ", teacher entropy "
                << r.history.back().teacher_entropy << "\n";
    } else if (*s3) {
      const auto m = pipeline::fit_stage3(cfg);
      std::cout << "affine map fit mse " << m.fit_mse << "\n";
    } else if (*ev) {
      std::vector<align::PipelineKind> kinds;
      if (pipeline_sel != "aligned") kinds.push_back(align::PipelineKind::ClipOnly);
      if (pipeline_sel != "clip_only") kinds.push_back(align::PipelineKind::Aligned);
      print_reports(pipeline::run_eval(cfg, kinds));
    } else if (*ap) {
      for (const auto& r : pipeline::ablate_prompts(cfg, ablation_seeds))
        std::printf("seed %llu %-8s average %s%%\n", static_cast<unsigned long long>(r.seed),
                    std::string(corpus::to_string(r.mode)).c_str(), pipeline::percent(r.report.average).c_str());
    } else if (*as) {
      for (const auto& r : pipeline::ablate_size(cfg, factors))
        std::printf("factor %zu (%zu per class) aligned average %s%%\n", r.factor, r.images_per_class,
                    pipeline::percent(r.report.average).c_str());
    } else if (*all) {
      print_reports(pipeline::run_all(cfg).reports);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
