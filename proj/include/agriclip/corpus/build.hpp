#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "agriclip/corpus/class_def.hpp"
#include "agriclip/corpus/image_io.hpp"
#include "agriclip/corpus/manifest.hpp"
#include "agriclip/corpus/prompts.hpp"
#include "agriclip/corpus/render.hpp"

namespace agriclip::corpus {

inline std::uint64_t sample_seed(std::uint64_t master, const std::string& dataset, int class_id, std::size_t index) {
  return derive_seed(master, dataset, static_cast<std::uint64_t>(class_id), static_cast<std::uint64_t>(index));
}

// Index i of a class lands in eval when floor((i+1)f) > floor(i f). The
// assignment of a prefix never changes when images_per_class grows, so a
// scaled corpus keeps the baseline's eval images out of its train split.
inline bool is_eval_index(std::size_t index, double eval_fraction) {
  return std::floor(double(index + 1) * eval_fraction) > std::floor(double(index) * eval_fraction);
}

inline std::string make_sample_id(const ClassDef& c, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-%02d-%05zu", c.class_id, index);
  return c.dataset_name + buf;
}

// Renders every sample, writes images/<sample_id>.img and manifest.jsonl
// under output_dir. A pure function of (spec, templates).
inline Manifest build_corpus(const CorpusSpec& spec, const std::filesystem::path& output_dir,
                             const PromptTemplates& templates = PromptTemplates::defaults()) {
  validate(spec);
  std::error_code ec;
  std::filesystem::create_directories(output_dir / "images", ec);
  if (ec) throw IoError("cannot create '" + (output_dir / "images").string() + "': " + ec.message());

  Manifest manifest;
  manifest.root = output_dir;
  const ImageSize size{spec.height, spec.width};
  for (const auto& cls : spec.classes) {
    const bool heldout = spec.heldout_datasets.contains(cls.dataset_name);
    const std::size_t count = heldout ? spec.heldout_images_per_class : spec.images_per_class;
    for (std::size_t i = 0; i < count; ++i) {
      const auto seed = sample_seed(spec.master_seed, cls.dataset_name, cls.class_id, i);
      const auto image = render_sample(cls, seed, size);
      SampleRecord r;
      r.sample_id = make_sample_id(cls, i);
      r.image_ref = "images/" + r.sample_id + ".img";
      r.dataset_name = cls.dataset_name;
      r.class_id = cls.class_id;
      r.class_name = cls.class_name;
      r.split = (heldout || is_eval_index(i, spec.eval_fraction)) ? Split::Eval : Split::Train;
      r.prompts = generate_prompts(cls, spec.prompt_mode, spec.prompts_per_image, derive_seed(seed, "prompts"),
                                   templates);
      r.content_hash = io::content_hash(image);
      io::save_image(output_dir / r.image_ref, image);
      manifest.records.push_back(std::move(r));
    }
  }
  check_split_disjoint(manifest.records);
  write_manifest(manifest, output_dir / "manifest.jsonl");
  return manifest;
}

// Desk-scale corpus: eight coarse classes, one fine-grained dataset made of
// two sibling pairs, and one held-out downstream dataset whose class names
// never occur in training prompts.
inline CorpusSpec default_corpus_spec(std::uint64_t master_seed = 0) {
  using BP = BasePattern;
  using FA = FineAttributeKind;
  CorpusSpec spec;
  spec.master_seed = master_seed;
  const std::string coarse = "alive_general";
  spec.classes = {
      {0, "wheat crop", coarse, BP::HorizontalStripes, {0.80, 0.68, 0.32}, {FA::SpotDensity, 0.3},
       "scattered rust pustules on the ears"},
      {1, "rice paddy", coarse, BP::VerticalStripes, {0.34, 0.68, 0.40}, {FA::StripeWidth, 0.4},
       "narrow parallel veins on the blades"},
      {2, "maize plant", coarse, BP::DiagonalStripes, {0.56, 0.76, 0.28}, {FA::ColorShift, 0.3},
       "pale yellow streaks on the leaves"},
      {3, "date palm", coarse, BP::Rings, {0.62, 0.44, 0.28}, {FA::EdgeCurl, 0.4},
       "dry curled tips on the fronds"},
      {4, "jersey cow", coarse, BP::Blotches, {0.76, 0.54, 0.40}, {FA::SpotDensity, 0.4},
       "a fawn coat with dark patches"},
      {5, "merino sheep", coarse, BP::Dots, {0.84, 0.82, 0.74}, {FA::StripeWidth, 0.3},
       "dense crimped white wool"},
      {6, "tilapia fish", coarse, BP::Checker, {0.52, 0.60, 0.76}, {FA::ColorShift, 0.3},
       "silver scales with a faint blue sheen"},
      {7, "freshwater eel", coarse, BP::Gradient, {0.36, 0.42, 0.30}, {FA::EdgeCurl, 0.3},
       "an elongated snake-like body"},
  };
  const std::string fine = "leaf_nutrient";
  const Rgb rice_leaf{0.30, 0.62, 0.30}, citrus_leaf{0.28, 0.54, 0.36};
  spec.classes.push_back({0, "rice leaf with nitrogen deficiency", fine, BP::HorizontalStripes, rice_leaf,
                          {FA::ColorShift, 0.9}, "yellowing patches along the blade"});
  spec.classes.push_back({1, "rice leaf with brown spot", fine, BP::HorizontalStripes, rice_leaf,
                          {FA::SpotDensity, 0.9}, "small brown spots scattered on the blade"});
  spec.classes.push_back({2, "citrus leaf with boron deficiency", fine, BP::Blotches, citrus_leaf,
                          {FA::EdgeCurl, 0.9}, "yellow patches and curled edges"});
  spec.classes.push_back({3, "citrus leaf with canker", fine, BP::Blotches, citrus_leaf, {FA::StripeWidth, 0.9},
                          "raised corky striated lesions"});

  const std::string unseen = "unseen_downstream";
  const Rgb wheat_leaf{0.70, 0.66, 0.30};
  spec.classes.push_back({0, "wheat leaf with yellowing patches", unseen, BP::DiagonalStripes, wheat_leaf,
                          {FA::ColorShift, 0.9}, "yellowing patches on the leaf"});
  spec.classes.push_back({1, "wheat leaf with brown spots", unseen, BP::DiagonalStripes, wheat_leaf,
                          {FA::SpotDensity, 0.9}, "small brown spots on the leaf"});
  spec.classes.push_back({2, "wheat leaf with curled edges", unseen, BP::DiagonalStripes, wheat_leaf,
                          {FA::EdgeCurl, 0.9}, "curled edges on the leaf"});
  spec.heldout_datasets = {unseen};
  return spec;
}

}  // namespace agriclip::corpus
