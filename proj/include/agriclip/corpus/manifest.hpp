#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "agriclip/corpus/image_io.hpp"
#include "agriclip/errors.hpp"

namespace agriclip::corpus {

enum class Split { Train, Eval };

inline std::string_view to_string(Split s) { return s == Split::Train ? "train" : "eval"; }

struct SampleRecord {
  std::string sample_id;
  std::string image_ref;  // relative to the manifest's directory
  std::string dataset_name;
  int class_id = 0;
  std::string class_name;
  Split split = Split::Train;
  std::vector<std::string> prompts;
  std::uint64_t content_hash = 0;
};

struct Manifest {
  std::vector<SampleRecord> records;
  std::filesystem::path root;  // directory image_refs resolve against

  std::vector<const SampleRecord*> split(Split s) const {
    std::vector<const SampleRecord*> out;
    for (const auto& r : records)
      if (r.split == s) out.push_back(&r);
    return out;
  }

  std::filesystem::path image_path(const SampleRecord& r) const { return root / r.image_ref; }
};

// Classes of one dataset, ordered by class_id.
struct DatasetClasses {
  std::string dataset_name;
  std::vector<std::string> class_names;
};

inline std::vector<DatasetClasses> datasets_of(const std::vector<const SampleRecord*>& records) {
  std::map<std::string, std::map<int, std::string>> by_dataset;
  for (const auto* r : records) by_dataset[r->dataset_name][r->class_id] = r->class_name;
  std::vector<DatasetClasses> out;
  for (const auto& [name, classes] : by_dataset) {
    DatasetClasses d{name, {}};
    int expected = 0;
    for (const auto& [id, cname] : classes) {
      if (id != expected++)
        throw ConfigError("dataset '" + name + "' has non-contiguous class ids");
      d.class_names.push_back(cname);
    }
    out.push_back(std::move(d));
  }
  return out;
}

inline void check_split_disjoint(const std::vector<SampleRecord>& records) {
  std::set<std::uint64_t> train;
  for (const auto& r : records)
    if (r.split == Split::Train) train.insert(r.content_hash);
  for (const auto& r : records)
    if (r.split == Split::Eval && train.contains(r.content_hash))
      throw FormatError("eval sample '" + r.sample_id + "' duplicates a training image (content hash " +
                        io::hex64(r.content_hash) + ")");
}

inline std::string record_to_json_line(const SampleRecord& r) {
  nlohmann::ordered_json j;
  j["sample_id"] = r.sample_id;
  j["image_ref"] = r.image_ref;
  j["dataset_name"] = r.dataset_name;
  j["class_id"] = r.class_id;
  j["class_name"] = r.class_name;
  j["split"] = std::string(to_string(r.split));
  j["prompts"] = r.prompts;
  j["content_hash"] = io::hex64(r.content_hash);
  return j.dump();
}

inline SampleRecord record_from_json(const nlohmann::json& j) {
  SampleRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.image_ref = j.at("image_ref").get<std::string>();
  r.dataset_name = j.at("dataset_name").get<std::string>();
  r.class_id = j.at("class_id").get<int>();
  r.class_name = j.at("class_name").get<std::string>();
  const auto split = j.at("split").get<std::string>();
  if (split == "train") r.split = Split::Train;
  else if (split == "eval") r.split = Split::Eval;
  else throw FormatError("record '" + r.sample_id + "': split must be train or eval");
  r.prompts = j.at("prompts").get<std::vector<std::string>>();
  if (r.prompts.empty()) throw FormatError("record '" + r.sample_id + "' has no prompts");
  r.content_hash = std::stoull(j.at("content_hash").get<std::string>(), nullptr, 16);
  return r;
}

inline void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::string text;
  for (const auto& r : m.records) text += record_to_json_line(r) + "\n";
  io::write_text(path, text);
}

// Parses manifest.jsonl and re-asserts train/eval disjointness.
inline Manifest load_manifest(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      m.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  check_split_disjoint(m.records);
  return m;
}

}  // namespace agriclip::corpus
