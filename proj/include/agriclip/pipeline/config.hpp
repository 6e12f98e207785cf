#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "agriclip/align/affine.hpp"
#include "agriclip/contrastive/trainer.hpp"
#include "agriclip/corpus/build.hpp"
#include "agriclip/corpus/image_io.hpp"
#include "agriclip/distill/trainer.hpp"
#include "agriclip/encoders/params.hpp"

namespace agriclip::pipeline {

// `key = value` lines, '#' starts a comment, dotted keys scope stages.
using KeyValues = std::map<std::string, std::string>;

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline KeyValues parse_key_values(const std::string& text, const std::string& source = "config") {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const auto key = trim(std::string_view(stripped).substr(0, eq));
    const auto value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

enum class AlignMethod { Ridge, Sgd };

struct AlignConfig {
  double lambda = 1e-3;
  AlignMethod method = AlignMethod::Ridge;
  std::size_t sgd_steps = 5000;
};

struct RunConfig {
  std::string run_id = "default";
  std::filesystem::path output_dir = "runs";
  std::uint64_t master_seed = 0;

  // Corpus.
  std::string class_file;  // optional JSON class list; built-in preset when empty
  std::size_t images_per_class = 200;
  std::size_t image_size = 64;
  double eval_fraction = 0.2;
  corpus::PromptMode prompt_mode = corpus::PromptMode::Custom;
  std::size_t prompts_per_image = 4;
  std::size_t heldout_images_per_class = 40;

  // Encoders (shape only; seeds are derived).
  std::size_t image_patch = 8, image_d_model = 64, image_hidden = 128, image_d_out = 64;
  std::size_t text_d_model = 64, text_hidden = 128, text_d_out = 64;
  std::size_t fine_patch = 8, fine_d_model = 96, fine_hidden = 192, fine_d_out = 96;

  contrastive::ContrastiveConfig contrastive;
  distill::DistillConfig distill;
  AlignConfig align;

  std::filesystem::path run_dir() const { return output_dir / run_id; }
  std::filesystem::path corpus_dir() const { return run_dir() / "corpus"; }
  std::filesystem::path checkpoint_dir() const { return run_dir() / "checkpoints"; }
  std::filesystem::path report_dir() const { return run_dir() / "reports"; }
};

// Stage seed = 64-bit hash(master_seed, stage_name).
inline std::uint64_t stage_seed(const RunConfig& c, std::string_view stage) { return derive_seed(c.master_seed, stage); }

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

inline std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v[0] == '-') throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

#define AGC_SIZE(KEY, MEMBER)                                                         \
  {KEY, {[](const RunConfig& c) { return std::to_string(c.MEMBER); },                 \
         [](RunConfig& c, const std::string& v) { c.MEMBER = parse_size(KEY, v); }}}
#define AGC_REAL(KEY, MEMBER)                                                         \
  {KEY, {[](const RunConfig& c) { return format_double(c.MEMBER); },                  \
         [](RunConfig& c, const std::string& v) { c.MEMBER = parse_real(KEY, v); }}}

inline const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"run_id", {[](const RunConfig& c) { return c.run_id; }, [](RunConfig& c, const std::string& v) { c.run_id = v; }}},
      {"output_dir",
       {[](const RunConfig& c) { return c.output_dir.string(); },
        [](RunConfig& c, const std::string& v) { c.output_dir = v; }}},
      {"master_seed",
       {[](const RunConfig& c) { return std::to_string(c.master_seed); },
        [](RunConfig& c, const std::string& v) { c.master_seed = parse_size("master_seed", v); }}},
      {"corpus.class_file",
       {[](const RunConfig& c) { return c.class_file; }, [](RunConfig& c, const std::string& v) { c.class_file = v; }}},
      AGC_SIZE("corpus.images_per_class", images_per_class),
      AGC_SIZE("corpus.image_size", image_size),
      AGC_REAL("corpus.eval_fraction", eval_fraction),
      {"corpus.prompt_mode",
       {[](const RunConfig& c) { return std::string(corpus::to_string(c.prompt_mode)); },
        [](RunConfig& c, const std::string& v) { c.prompt_mode = corpus::parse_prompt_mode(v); }}},
      AGC_SIZE("corpus.prompts_per_image", prompts_per_image),
      AGC_SIZE("corpus.heldout_images_per_class", heldout_images_per_class),
      AGC_SIZE("encoder.image.patch_size", image_patch),
      AGC_SIZE("encoder.image.d_model", image_d_model),
      AGC_SIZE("encoder.image.hidden", image_hidden),
      AGC_SIZE("encoder.image.d_out", image_d_out),
      AGC_SIZE("encoder.text.d_model", text_d_model),
      AGC_SIZE("encoder.text.hidden", text_hidden),
      AGC_SIZE("encoder.text.d_out", text_d_out),
      AGC_SIZE("encoder.fine.patch_size", fine_patch),
      AGC_SIZE("encoder.fine.d_model", fine_d_model),
      AGC_SIZE("encoder.fine.hidden", fine_hidden),
      AGC_SIZE("encoder.fine.d_out", fine_d_out),
      AGC_SIZE("contrastive.batch_size", contrastive.batch_size),
      AGC_REAL("contrastive.temperature", contrastive.temperature),
      AGC_SIZE("contrastive.epochs", contrastive.epochs),
      AGC_REAL("contrastive.lr", contrastive.lr),
      AGC_REAL("contrastive.weight_decay", contrastive.weight_decay),
      {"contrastive.symmetric",
       {[](const RunConfig& c) { return std::string(c.contrastive.symmetric ? "true" : "false"); },
        [](RunConfig& c, const std::string& v) { c.contrastive.symmetric = parse_bool("contrastive.symmetric", v); }}},
      AGC_REAL("distill.global_scale_min", distill.crops.global_scale.lo),
      AGC_REAL("distill.global_scale_max", distill.crops.global_scale.hi),
      AGC_REAL("distill.local_scale_min", distill.crops.local_scale.lo),
      AGC_REAL("distill.local_scale_max", distill.crops.local_scale.hi),
      AGC_SIZE("distill.global_crops", distill.crops.global_crops),
      AGC_SIZE("distill.local_crops", distill.crops.local_crops),
      AGC_REAL("distill.flip_probability", distill.crops.flip_probability),
      AGC_REAL("distill.brightness", distill.crops.brightness),
      AGC_REAL("distill.student_temperature", distill.student_temperature),
      AGC_REAL("distill.teacher_temperature", distill.teacher_temperature),
      AGC_REAL("distill.ema_momentum", distill.ema_momentum),
      AGC_REAL("distill.center_momentum", distill.center_momentum),
      AGC_SIZE("distill.prototypes", distill.prototypes),
      AGC_SIZE("distill.epochs", distill.epochs),
      {"distill.unit_prototypes",
       {[](const RunConfig& c) { return std::string(c.distill.unit_prototypes ? "true" : "false"); },
        [](RunConfig& c, const std::string& v) { c.distill.unit_prototypes = parse_bool("distill.unit_prototypes", v); }}},
      AGC_SIZE("distill.batch_size", distill.batch_size),
      AGC_REAL("distill.lr", distill.lr),
      AGC_REAL("distill.weight_decay", distill.weight_decay),
      AGC_REAL("align.lambda", align.lambda),
      {"align.method",
       {[](const RunConfig& c) { return std::string(c.align.method == AlignMethod::Ridge ? "ridge" : "sgd"); },
        [](RunConfig& c, const std::string& v) {
          if (v == "ridge") c.align.method = AlignMethod::Ridge;
          else if (v == "sgd") c.align.method = AlignMethod::Sgd;
          else throw ConfigError("align.method must be ridge or sgd");
        }}},
      AGC_SIZE("align.sgd_steps", align.sgd_steps),
  };
  return table;
}

#undef AGC_SIZE
#undef AGC_REAL

}  // namespace detail

inline void apply_overrides(RunConfig& c, const KeyValues& kv) {
  const auto& table = detail::fields();
  for (const auto& [k, v] : kv) {
    auto it = table.find(k);
    if (it == table.end()) throw ConfigError("unknown config key '" + k + "'");
    it->second.set(c, v);
  }
}

inline void validate(const RunConfig& c) {
  if (c.run_id.empty()) throw ConfigError("run_id must be non-empty");
  if (c.run_id.find('/') != std::string::npos || c.run_id == "." || c.run_id == "..")
    throw ConfigError("run_id must be a single path component");
  contrastive::validate(c.contrastive);
  distill::validate(c.distill);
  if (!(c.align.lambda >= 0.0)) throw ConfigError("align.lambda must be >= 0");
}

// Sorted `key = value` rendering of every field; the digest hashes this text.
inline std::string canonical_text(const RunConfig& c) {
  std::string out;
  for (const auto& [k, f] : detail::fields()) out += k + " = " + f.get(c) + "\n";
  return out;
}

inline std::string config_digest(const RunConfig& c) { return io::hex64(fnv1a64(canonical_text(c))); }

inline RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c;
  apply_overrides(c, parse_key_values(io::read_text(path), path.string()));
  validate(c);
  return c;
}

// Encoder configurations implied by the run config and corpus vocabulary.
inline encoders::EncoderConfig image_encoder_config(const RunConfig& c) {
  encoders::EncoderConfig e;
  e.kind = encoders::EncoderKind::Image;
  e.image_height = e.image_width = c.image_size;
  e.patch_size = c.image_patch;
  e.d_model = c.image_d_model;
  e.hidden = c.image_hidden;
  e.d_out = c.image_d_out;
  e.init_seed = stage_seed(c, "init.image");
  return e;
}

inline encoders::EncoderConfig text_encoder_config(const RunConfig& c, std::size_t vocab_size) {
  encoders::EncoderConfig e;
  e.kind = encoders::EncoderKind::Text;
  e.vocab_size = vocab_size;
  e.d_model = c.text_d_model;
  e.hidden = c.text_hidden;
  e.d_out = c.text_d_out;
  e.init_seed = stage_seed(c, "init.text");
  return e;
}

inline encoders::EncoderConfig fine_encoder_config(const RunConfig& c) {
  encoders::EncoderConfig e;
  e.kind = encoders::EncoderKind::Image;
  e.image_height = e.image_width = c.image_size;
  e.patch_size = c.fine_patch;
  e.d_model = c.fine_d_model;
  e.hidden = c.fine_hidden;
  e.d_out = c.fine_d_out;
  e.init_seed = stage_seed(c, "init.fine");
  return e;
}

// Class list file: {"heldout_datasets": [...], "classes": [{...}, ...]}.
inline corpus::CorpusSpec load_class_file(const std::filesystem::path& path, corpus::CorpusSpec spec) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
    spec.classes.clear();
    for (const auto& cj : j.at("classes")) {
      corpus::ClassDef c;
      c.class_id = cj.at("class_id").get<int>();
      c.class_name = cj.at("class_name").get<std::string>();
      c.dataset_name = cj.at("dataset_name").get<std::string>();
      c.base_pattern = corpus::parse_base_pattern(cj.at("base_pattern").get<std::string>());
      const auto color = cj.at("base_color").get<std::vector<double>>();
      if (color.size() != 3) throw ConfigError("base_color needs three channels");
      c.base_color = {color[0], color[1], color[2]};
      c.fine_attribute.kind = corpus::parse_attribute_kind(cj.at("fine_attribute").get<std::string>());
      c.fine_attribute.magnitude = cj.at("magnitude").get<double>();
      c.attribute_phrase = cj.value("attribute_phrase", std::string());
      spec.classes.push_back(std::move(c));
    }
    spec.heldout_datasets.clear();
    if (j.contains("heldout_datasets"))
      for (const auto& d : j.at("heldout_datasets")) spec.heldout_datasets.insert(d.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return spec;
}

inline corpus::CorpusSpec corpus_spec(const RunConfig& c) {
  auto spec = corpus::default_corpus_spec(stage_seed(c, "corpus"));
  if (!c.class_file.empty()) spec = load_class_file(c.class_file, spec);
  spec.images_per_class = c.images_per_class;
  spec.height = spec.width = c.image_size;
  spec.eval_fraction = c.eval_fraction;
  spec.prompt_mode = c.prompt_mode;
  spec.prompts_per_image = c.prompts_per_image;
  spec.heldout_images_per_class = c.heldout_images_per_class;
  return spec;
}

}  // namespace agriclip::pipeline
