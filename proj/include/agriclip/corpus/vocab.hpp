#pragma once

#include <cctype>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "agriclip/corpus/image_io.hpp"
#include "agriclip/corpus/manifest.hpp"

namespace agriclip::corpus {

inline constexpr int kPadId = 0;
inline constexpr int kOovId = 1;

// Lowercase; ASCII whitespace and punctuation separate tokens. Bytes >= 0x80
// (UTF-8 continuation/lead bytes) stay inside tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (u >= 0x80 || std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

class Vocab {
 public:
  Vocab() = default;

  explicit Vocab(const std::set<std::string>& tokens) {
    ids_["<pad>"] = kPadId;
    ids_["<oov>"] = kOovId;
    order_ = {"<pad>", "<oov>"};
    for (const auto& t : tokens) {
      ids_[t] = static_cast<int>(order_.size());
      order_.push_back(t);
    }
  }

  std::size_t size() const { return order_.size(); }

  int id(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? kOovId : it->second;
  }

  const std::string& token(int id) const { return order_.at(static_cast<std::size_t>(id)); }

  std::vector<int> encode(std::string_view text) const {
    std::vector<int> out;
    for (const auto& t : tokenize(text)) out.push_back(id(t));
    return out;
  }

  std::string to_tsv() const {
    std::string out;
    for (std::size_t i = 0; i < order_.size(); ++i) out += order_[i] + "\t" + std::to_string(i) + "\n";
    return out;
  }

  static Vocab from_tsv(const std::string& text, const std::string& source = "vocab") {
    Vocab v;
    std::istringstream in(text);
    std::string line;
    std::size_t expected = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw FormatError(source + ": missing tab in line " + std::to_string(expected + 1));
      const auto tok = line.substr(0, tab);
      const auto id = std::stoul(line.substr(tab + 1));
      if (id != expected) throw FormatError(source + ": ids must be dense and ordered");
      v.ids_[tok] = static_cast<int>(id);
      v.order_.push_back(tok);
      ++expected;
    }
    if (v.order_.size() < 2 || v.order_[kPadId] != "<pad>" || v.order_[kOovId] != "<oov>")
      throw FormatError(source + ": reserved tokens <pad>/<oov> missing");
    return v;
  }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.order_ == b.order_; }

 private:
  std::map<std::string, int> ids_;
  std::vector<std::string> order_;
};

// Vocabulary over every prompt of the given records; ids assigned in
// lexicographic token order after the two reserved ids.
inline Vocab build_vocab(const std::vector<const SampleRecord*>& records) {
  std::set<std::string> tokens;
  std::size_t prompts = 0;
  for (const auto* r : records)
    for (const auto& p : r->prompts) {
      ++prompts;
      for (auto& t : tokenize(p)) tokens.insert(std::move(t));
    }
  if (prompts == 0 || tokens.empty()) throw ConfigError("build_vocab: no prompts to build a vocabulary from");
  return Vocab(tokens);
}

inline Vocab build_vocab(const std::vector<std::string>& prompts) {
  std::set<std::string> tokens;
  for (const auto& p : prompts)
    for (auto& t : tokenize(p)) tokens.insert(std::move(t));
  if (tokens.empty()) throw ConfigError("build_vocab: no prompts to build a vocabulary from");
  return Vocab(tokens);
}

inline void save_vocab(const Vocab& v, const std::filesystem::path& path) { io::write_text(path, v.to_tsv()); }

inline Vocab load_vocab(const std::filesystem::path& path) {
  return Vocab::from_tsv(io::read_text(path), path.string());
}

}  // namespace agriclip::corpus
