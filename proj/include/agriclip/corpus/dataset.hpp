#pragma once

#include <vector>

#include "agriclip/corpus/image_io.hpp"
#include "agriclip/corpus/manifest.hpp"

namespace agriclip::corpus {

// Records of one split together with their decoded pixels, in manifest order.
struct LoadedSplit {
  std::vector<const SampleRecord*> records;
  std::vector<Tensor<float>> images;

  std::size_t size() const { return records.size(); }
};

inline LoadedSplit load_split(const Manifest& manifest, Split split) {
  LoadedSplit out;
  out.records = manifest.split(split);
  out.images.reserve(out.records.size());
  for (const auto* r : out.records) {
    try {
      out.images.push_back(io::load_image(manifest.image_path(*r)));
    } catch (const Error& e) {
      throw IoError("sample '" + r->sample_id + "': " + e.what());
    }
    if (io::content_hash(out.images.back()) != r->content_hash)
      throw FormatError("sample '" + r->sample_id + "': content hash does not match image bytes");
  }
  return out;
}

}  // namespace agriclip::corpus
