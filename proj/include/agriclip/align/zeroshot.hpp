#pragma once

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "agriclip/align/affine.hpp"
#include "agriclip/corpus/dataset.hpp"
#include "agriclip/corpus/prompts.hpp"
#include "agriclip/corpus/vocab.hpp"
#include "agriclip/encoders/encoder.hpp"

namespace agriclip::align {

struct ConceptBank {
  std::vector<std::string> class_names;
  Tensor<double> concepts;  // C x d_c, unit rows, row order = class order
  std::vector<std::vector<std::string>> prompts;
};

// CLIP-style prompt ensemble built from the class name alone.
inline std::vector<std::string> clip_templates() {
  return {"a photo of a {class}", "a close-up photo of a {class}", "an image of a {class}",
          "a picture of a {class}"};
}

inline std::vector<std::string> ensemble_prompts(const std::string& class_name,
                                                 const std::vector<std::string>& templates = clip_templates()) {
  std::vector<std::string> out;
  for (const auto& t : templates) out.push_back(corpus::fill_slot(t, "{class}", class_name));
  return out;
}

// Concept vector per class: l2_normalize(mean of the encoded prompt ensemble).
template <typename T>
ConceptBank build_concept_bank(const encoders::EncoderParams<T>& text, const corpus::Vocab& vocab,
                               const std::vector<std::string>& class_names,
                               const std::map<std::string, std::vector<std::string>>& prompts_by_class) {
  if (class_names.empty()) throw ConfigError("build_concept_bank: no classes");
  const std::set<std::string> known(class_names.begin(), class_names.end());
  for (const auto& [name, _] : prompts_by_class)
    if (!known.contains(name)) throw ConfigError("build_concept_bank: unknown class name '" + name + "'");

  ConceptBank bank;
  bank.class_names = class_names;
  bank.concepts = Tensor<double>({class_names.size(), text.config.d_out});
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    auto it = prompts_by_class.find(class_names[c]);
    if (it == prompts_by_class.end() || it->second.empty())
      throw ConfigError("build_concept_bank: class '" + class_names[c] + "' has no prompts");
    Tensor<double> mean({text.config.d_out});
    for (const auto& p : it->second) {
      const auto ids = vocab.encode(p);
      const auto e = encoders::encode_text<T>(text, ids);
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += static_cast<double>(e[j]);
    }
    for (auto& v : mean.data()) v /= static_cast<double>(it->second.size());
    const auto unit = l2_normalize(mean);
    std::copy(unit.data().begin(), unit.data().end(), bank.concepts.row(c).begin());
    bank.prompts.push_back(it->second);
  }
  return bank;
}

template <typename T>
ConceptBank build_clip_concept_bank(const encoders::EncoderParams<T>& text, const corpus::Vocab& vocab,
                                    const std::vector<std::string>& class_names) {
  std::map<std::string, std::vector<std::string>> prompts;
  for (const auto& c : class_names) prompts[c] = ensemble_prompts(c);
  return build_concept_bank(text, vocab, class_names, prompts);
}

struct Prediction {
  std::size_t label = 0;
  std::vector<double> scores;
};

// scores = z T^T with z = l2_normalize(feature W + b) when a map is given,
// else z = l2_normalize(feature). argmax keeps the lowest index on ties.
inline Prediction zeroshot_classify(std::span<const double> feature, const AffineMap* map, const ConceptBank& bank) {
  Tensor<double> z;
  if (map) {
    z = map->apply(feature);
  } else {
    z = Tensor<double>({feature.size()}, std::vector<double>(feature.begin(), feature.end()));
  }
  if (z.size() != bank.concepts.cols())
    throw ParameterError("zeroshot_classify: feature dim " + std::to_string(z.size()) + " does not match concept dim " +
                         std::to_string(bank.concepts.cols()));
  z = l2_normalize(z);
  Prediction p;
  p.scores.resize(bank.concepts.rows());
  for (std::size_t c = 0; c < bank.concepts.rows(); ++c)
    p.scores[c] = dot<double>(z.data(), bank.concepts.row(c));
  p.label = argmax<double>(p.scores);
  return p;
}

// Row i = encoder output for sample i, in split order (rows are unit norm).
template <typename T>
Tensor<double> extract_features(const encoders::EncoderParams<T>& params, const corpus::LoadedSplit& split) {
  if (split.size() == 0) throw ConfigError("extract_features: empty split");
  Tensor<double> x({split.size(), params.config.d_out});
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto e = encoders::encode_image<T>(params, split.images[i]);
    for (std::size_t j = 0; j < e.size(); ++j) x(i, j) = static_cast<double>(e[j]);
  }
  return x;
}

enum class PipelineKind { ClipOnly, Aligned };

inline std::string_view to_string(PipelineKind k) { return k == PipelineKind::ClipOnly ? "clip_only" : "aligned"; }

struct DatasetScore {
  double accuracy = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

struct ZeroShotReport {
  std::string run_id;
  std::string pipeline;
  std::map<std::string, DatasetScore> per_dataset;
  double average = 0;  // unweighted mean over datasets
  std::vector<std::string> sample_ids;  // evaluated samples, in order
};

struct EvalItem {
  std::string sample_id;
  std::string dataset_name;
  int class_id = 0;
};

inline std::vector<EvalItem> eval_items(const std::vector<const corpus::SampleRecord*>& records) {
  std::vector<EvalItem> items;
  for (const auto* r : records) items.push_back({r->sample_id, r->dataset_name, r->class_id});
  return items;
}

// Top-1 accuracy per dataset (each dataset classified against its own
// concept bank) and the unweighted average over datasets.
inline ZeroShotReport evaluate(const std::vector<EvalItem>& items, const Tensor<double>& features, const AffineMap* map,
                               const std::map<std::string, ConceptBank>& banks, PipelineKind pipeline,
                               const std::string& run_id) {
  if (items.empty()) throw ConfigError("evaluate: empty eval split");
  if (features.rows() != items.size()) throw ParameterError("evaluate: feature rows do not match eval items");
  ZeroShotReport report;
  report.run_id = run_id;
  report.pipeline = std::string(to_string(pipeline));
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    auto bank = banks.find(it.dataset_name);
    if (bank == banks.end()) throw ConfigError("evaluate: no concept bank for dataset '" + it.dataset_name + "'");
    const auto pred = zeroshot_classify(features.row(i), map, bank->second);
    auto& score = report.per_dataset[it.dataset_name];
    ++score.total;
    if (static_cast<int>(pred.label) == it.class_id) ++score.correct;
    report.sample_ids.push_back(it.sample_id);
  }
  double sum = 0;
  for (auto& [_, s] : report.per_dataset) {
    s.accuracy = static_cast<double>(s.correct) / static_cast<double>(s.total);
    sum += s.accuracy;
  }
  report.average = sum / static_cast<double>(report.per_dataset.size());
  return report;
}

}  // namespace agriclip::align
