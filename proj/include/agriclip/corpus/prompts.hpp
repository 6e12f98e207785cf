#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "agriclip/corpus/class_def.hpp"
#include "agriclip/numerics/rng.hpp"

namespace agriclip::corpus {

// Slot-filled template grammar standing in for LLM-written captions.
// Slots: {class} and {attr}. The first template of each list is the
// canonical form and always leads the emitted prompt list.
struct PromptTemplates {
  std::vector<std::string> generic;
  std::vector<std::string> custom;

  static PromptTemplates defaults() {
    PromptTemplates t;
    t.generic = {
        "a photo of a {class}",         "an image of a {class}",     "a close-up photo of a {class}",
        "a picture of a {class}",       "a cropped photo of a {class}", "a field photo of a {class}",
        "a bright photo of a {class}",  "a good photo of a {class}",
    };
    const std::vector<std::string> nouns = {"photo", "image", "close-up", "picture"};
    const std::vector<std::string> structures = {
        "a {noun} of a {class}, characterized by {attr}",
        "a {noun} showing a {class} with {attr}",
        "{attr} seen on a {class} in this {noun}",
        "{class} displaying {attr}, captured in a {noun}",
        "a detailed {noun} of a {class} where {attr} can be seen",
        "field {noun}: a {class} marked by {attr}",
    };
    for (const auto& s : structures)
      for (const auto& n : nouns) {
        std::string filled = s;
        filled.replace(filled.find("{noun}"), 6, n);
        t.custom.push_back(std::move(filled));
      }
    return t;
  }
};

inline std::string fill_slot(std::string text, std::string_view slot, std::string_view value) {
  for (auto pos = text.find(slot); pos != std::string::npos; pos = text.find(slot, pos + value.size()))
    text.replace(pos, slot.size(), value);
  return text;
}

inline std::string fill_template(const std::string& tmpl, const ClassDef& cls) {
  return fill_slot(fill_slot(tmpl, "{class}", cls.class_name), "{attr}", cls.attribute_phrase);
}

// k pairwise-distinct captions for one image; deterministic in seed.
inline std::vector<std::string> generate_prompts(const ClassDef& cls, PromptMode mode, std::size_t k,
                                                 std::uint64_t seed,
                                                 const PromptTemplates& templates = PromptTemplates::defaults()) {
  if (k == 0) throw ConfigError("generate_prompts: k must be at least 1");
  if (mode == PromptMode::Custom && cls.attribute_phrase.empty())
    throw ConfigError("generate_prompts: custom mode requires an attribute phrase for '" + cls.class_name + "'");
  const auto& list = mode == PromptMode::Generic ? templates.generic : templates.custom;
  if (list.empty()) throw ConfigError("generate_prompts: empty template list");

  std::vector<std::string> candidates;
  for (const auto& t : list) {
    if (t.find("{class}") == std::string::npos)
      throw ConfigError("prompt template lacks a {class} slot: '" + t + "'");
    if (mode == PromptMode::Custom && t.find("{attr}") == std::string::npos)
      throw ConfigError("custom prompt template lacks an {attr} slot: '" + t + "'");
    auto text = fill_template(t, cls);
    if (std::find(candidates.begin(), candidates.end(), text) == candidates.end())
      candidates.push_back(std::move(text));
  }
  if (candidates.size() < k) {
    throw ConfigError("generate_prompts: only " + std::to_string(candidates.size()) +
                      " distinct prompts available, " + std::to_string(k) + " requested");
  }
  Rng rng(seed);
  rng.shuffle(candidates.begin() + 1, candidates.end());
  candidates.resize(k);
  return candidates;
}

}  // namespace agriclip::corpus
