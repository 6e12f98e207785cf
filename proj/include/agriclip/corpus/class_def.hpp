#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "agriclip/errors.hpp"

namespace agriclip::corpus {

enum class BasePattern {
  HorizontalStripes,
  VerticalStripes,
  DiagonalStripes,
  Checker,
  Rings,
  Dots,
  Gradient,
  Blotches,
};

enum class FineAttributeKind { SpotDensity, StripeWidth, ColorShift, EdgeCurl };

enum class PromptMode { Generic, Custom };

struct FineAttribute {
  FineAttributeKind kind = FineAttributeKind::SpotDensity;
  double magnitude = 0.0;  // [0, 1]; 0 leaves the base render untouched
};

using Rgb = std::array<double, 3>;

struct ClassDef {
  int class_id = 0;
  std::string class_name;
  std::string dataset_name;
  BasePattern base_pattern = BasePattern::HorizontalStripes;
  Rgb base_color{0.5, 0.5, 0.5};
  FineAttribute fine_attribute;
  std::string attribute_phrase;
};

struct CorpusSpec {
  std::vector<ClassDef> classes;
  std::size_t images_per_class = 200;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 3;
  double eval_fraction = 0.2;
  PromptMode prompt_mode = PromptMode::Custom;
  std::size_t prompts_per_image = 4;
  std::uint64_t master_seed = 0;
  // Datasets rendered into the eval split only; their class names never
  // appear in training prompts.
  std::set<std::string> heldout_datasets;
  std::size_t heldout_images_per_class = 40;
};

inline std::string_view to_string(BasePattern p) {
  switch (p) {
    case BasePattern::HorizontalStripes: return "horizontal_stripes";
    case BasePattern::VerticalStripes: return "vertical_stripes";
    case BasePattern::DiagonalStripes: return "diagonal_stripes";
    case BasePattern::Checker: return "checker";
    case BasePattern::Rings: return "rings";
    case BasePattern::Dots: return "dots";
    case BasePattern::Gradient: return "gradient";
    case BasePattern::Blotches: return "blotches";
  }
  return "?";
}

inline std::string_view to_string(FineAttributeKind k) {
  switch (k) {
    case FineAttributeKind::SpotDensity: return "spot_density";
    case FineAttributeKind::StripeWidth: return "stripe_width";
    case FineAttributeKind::ColorShift: return "color_shift";
    case FineAttributeKind::EdgeCurl: return "edge_curl";
  }
  return "?";
}

inline std::string_view to_string(PromptMode m) { return m == PromptMode::Generic ? "generic" : "custom"; }

inline BasePattern parse_base_pattern(std::string_view s) {
  for (auto p : {BasePattern::HorizontalStripes, BasePattern::VerticalStripes, BasePattern::DiagonalStripes,
                 BasePattern::Checker, BasePattern::Rings, BasePattern::Dots, BasePattern::Gradient,
                 BasePattern::Blotches})
    if (to_string(p) == s) return p;
  throw ConfigError("unknown base pattern '" + std::string(s) + "'");
}

inline FineAttributeKind parse_attribute_kind(std::string_view s) {
  for (auto k : {FineAttributeKind::SpotDensity, FineAttributeKind::StripeWidth, FineAttributeKind::ColorShift,
                 FineAttributeKind::EdgeCurl})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown fine attribute '" + std::string(s) + "'");
}

inline PromptMode parse_prompt_mode(std::string_view s) {
  if (s == "generic") return PromptMode::Generic;
  if (s == "custom") return PromptMode::Custom;
  throw ConfigError("prompt mode must be 'generic' or 'custom', got '" + std::string(s) + "'");
}

// Two classes are fine-grained siblings when they share the coarse appearance
// and differ only in their local attribute.
inline bool are_siblings(const ClassDef& a, const ClassDef& b) {
  return a.base_pattern == b.base_pattern && a.base_color == b.base_color &&
         (a.fine_attribute.kind != b.fine_attribute.kind ||
          a.fine_attribute.magnitude != b.fine_attribute.magnitude);
}

inline void validate(const CorpusSpec& spec) {
  if (spec.classes.size() < 2) throw ConfigError("corpus needs at least two classes");
  if (spec.images_per_class == 0) throw ConfigError("images_per_class must be positive");
  if (spec.height < 32 || spec.width < 32) throw ConfigError("image size must be at least 32x32");
  if (spec.channels != 3) throw ConfigError("images must have 3 channels");
  if (!(spec.eval_fraction > 0.0 && spec.eval_fraction < 1.0))
    throw ConfigError("eval_fraction must lie in (0, 1)");
  if (spec.prompts_per_image == 0) throw ConfigError("prompts_per_image must be positive");
  if (!spec.heldout_datasets.empty() && spec.heldout_images_per_class == 0)
    throw ConfigError("heldout_images_per_class must be positive");

  std::map<std::string, std::set<int>> ids;
  for (const auto& c : spec.classes) {
    if (c.class_id < 0) throw ConfigError("class_id must be non-negative");
    if (c.class_name.empty() || c.dataset_name.empty())
      throw ConfigError("class and dataset names must be non-empty");
    if (!ids[c.dataset_name].insert(c.class_id).second)
      throw ConfigError("duplicate class_id " + std::to_string(c.class_id) + " in dataset " + c.dataset_name);
    const double m = c.fine_attribute.magnitude;
    if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("fine attribute magnitude must lie in [0, 1]");
    for (double ch : c.base_color)
      if (!(ch >= 0.0 && ch <= 1.0)) throw ConfigError("base color channels must lie in [0, 1]");
    if (spec.prompt_mode == PromptMode::Custom && c.attribute_phrase.empty())
      throw ConfigError("custom prompts need an attribute phrase for class '" + c.class_name + "'");
  }
  for (const auto& d : spec.heldout_datasets)
    if (!ids.contains(d)) throw ConfigError("held-out dataset '" + d + "' has no classes");

  bool has_siblings = false;
  for (std::size_t i = 0; i < spec.classes.size() && !has_siblings; ++i)
    for (std::size_t j = i + 1; j < spec.classes.size(); ++j)
      if (are_siblings(spec.classes[i], spec.classes[j])) {
        has_siblings = true;
        break;
      }
  if (!has_siblings)
    throw ConfigError("corpus needs at least one fine-grained sibling pair (same base pattern and colour)");
}

}  // namespace agriclip::corpus
