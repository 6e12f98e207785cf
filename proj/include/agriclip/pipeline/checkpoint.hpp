#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "agriclip/align/affine.hpp"
#include "agriclip/corpus/image_io.hpp"
#include "agriclip/distill/trainer.hpp"
#include "agriclip/encoders/params.hpp"

namespace agriclip::pipeline {

inline constexpr std::uint16_t kCheckpointVersion = 1;

enum class StageTag : std::uint16_t { Contrastive = 1, Distill = 2, Align = 3 };

inline std::string_view to_string(StageTag t) {
  switch (t) {
    case StageTag::Contrastive: return "contrastive";
    case StageTag::Distill: return "distill";
    case StageTag::Align: return "align";
  }
  return "unknown";
}

struct NamedTensor {
  std::string name;
  Tensor<float> value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  std::uint16_t version = kCheckpointVersion;
  StageTag stage = StageTag::Contrastive;
  std::vector<encoders::EncoderConfig> encoders;
  std::vector<NamedTensor> tensors;
  std::string run_id;
  std::string config_digest;

  const Tensor<float>& get(std::string_view name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t.value;
    throw FormatError("checkpoint has no tensor named '" + std::string(name) + "'");
  }
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

inline nlohmann::ordered_json encoder_to_json(const encoders::EncoderConfig& c) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(encoders::to_string(c.kind));
  j["image_height"] = c.image_height;
  j["image_width"] = c.image_width;
  j["patch_size"] = c.patch_size;
  j["vocab_size"] = c.vocab_size;
  j["d_model"] = c.d_model;
  j["hidden"] = c.hidden;
  j["d_out"] = c.d_out;
  j["init_seed"] = io::hex64(c.init_seed);
  return j;
}

inline encoders::EncoderConfig encoder_from_json(const nlohmann::json& j) {
  encoders::EncoderConfig c;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "image") c.kind = encoders::EncoderKind::Image;
  else if (kind == "text") c.kind = encoders::EncoderKind::Text;
  else throw FormatError("checkpoint: unknown encoder kind '" + kind + "'");
  c.image_height = j.at("image_height").get<std::size_t>();
  c.image_width = j.at("image_width").get<std::size_t>();
  c.patch_size = j.at("patch_size").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.d_out = j.at("d_out").get<std::size_t>();
  c.init_seed = std::stoull(j.at("init_seed").get<std::string>(), nullptr, 16);
  return c;
}

}  // namespace detail

// "AGC1", u16 version, u16 stage, u32 count, then per tensor: u16 name
// length, name bytes, u8 rank, u32 dims, f32 payload. A u32-length JSON block
// with run_id, config digest and encoder configs follows the table.
inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& ck) {
  std::vector<unsigned char> out = {'A', 'G', 'C', '1'};
  io::put_u16(out, ck.version);
  io::put_u16(out, static_cast<std::uint16_t>(ck.stage));
  io::put_u32(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    if (t.name.size() > 0xFFFF) throw ParameterError("checkpoint tensor name too long");
    io::put_u16(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    if (t.value.rank() > 0xFF) throw ParameterError("checkpoint tensor rank too large");
    io::put_u8(out, static_cast<std::uint8_t>(t.value.rank()));
    for (auto d : t.value.dims()) io::put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.value.data()) io::put_f32(out, v);
  }
  nlohmann::ordered_json meta;
  meta["run_id"] = ck.run_id;
  meta["config_digest"] = ck.config_digest;
  meta["encoders"] = nlohmann::ordered_json::array();
  for (const auto& e : ck.encoders) meta["encoders"].push_back(detail::encoder_to_json(e));
  const auto text = meta.dump();
  io::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  return out;
}

inline Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes, const std::string& source,
                                    std::optional<StageTag> expected = std::nullopt) {
  io::ByteReader in(bytes, source);
  if (bytes.size() < 4 || bytes[0] != 'A' || bytes[1] != 'G' || bytes[2] != 'C' || bytes[3] != '1')
    in.fail("bad magic, expected AGC1");
  in.skip(4);
  Checkpoint ck;
  ck.version = in.u16();
  if (ck.version != kCheckpointVersion)
    throw FormatError(source + ": unsupported checkpoint version " + std::to_string(ck.version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  const auto stage = in.u16();
  if (stage < 1 || stage > 3) in.fail("unknown stage tag " + std::to_string(stage));
  ck.stage = static_cast<StageTag>(stage);
  if (expected && ck.stage != *expected)
    throw FormatError(source + ": stage tag mismatch, found " + std::string(to_string(ck.stage)) + ", expected " +
                      std::string(to_string(*expected)));
  const auto count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto len = in.u16();
    t.name = in.text(len);
    const auto rank = in.u8();
    if (rank == 0) in.fail("tensor '" + t.name + "' has rank 0");
    Dims dims;
    for (std::uint8_t r = 0; r < rank; ++r) {
      const auto d = in.u32();
      if (d == 0) in.fail("tensor '" + t.name + "' has a zero extent");
      dims.push_back(d);
    }
    const auto n = dims_product(dims);
    if (n > in.remaining() / 4) in.fail("tensor '" + t.name + "' payload truncated");
    t.value = Tensor<float>(dims);
    for (auto& v : t.value.data()) v = in.f32();
    ck.tensors.push_back(std::move(t));
  }
  const auto meta_len = in.u32();
  const auto meta_text = in.text(meta_len);
  if (in.remaining() != 0) in.fail("trailing bytes after metadata");
  try {
    const auto meta = nlohmann::json::parse(meta_text);
    ck.run_id = meta.at("run_id").get<std::string>();
    ck.config_digest = meta.at("config_digest").get<std::string>();
    for (const auto& e : meta.at("encoders")) ck.encoders.push_back(detail::encoder_from_json(e));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(source + ": bad checkpoint metadata: " + e.what());
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<StageTag> expected = std::nullopt) {
  return decode_checkpoint(io::read_file(path), path.string(), expected);
}

// Encoder parameters <-> named tensors with a name prefix.
inline void append_params(Checkpoint& ck, const std::string& prefix, const encoders::EncoderParams<float>& p) {
  ck.encoders.push_back(p.config);
  p.for_each([&](std::string_view name, const Tensor<float>& t) { ck.tensors.push_back({prefix + std::string(name), t}); });
}

inline encoders::EncoderParams<float> extract_params(const Checkpoint& ck, const std::string& prefix,
                                                     const encoders::EncoderConfig& config) {
  auto p = encoders::init_params<float>(config);
  p.for_each([&](std::string_view name, Tensor<float>& t) {
    const auto& stored = ck.get(prefix + std::string(name));
    if (stored.dims() != t.dims())
      throw FormatError("checkpoint tensor '" + prefix + std::string(name) + "' has shape " +
                        dims_string(stored.dims()) + ", expected " + dims_string(t.dims()));
    t = stored;
  });
  return p;
}

inline Checkpoint contrastive_checkpoint(const encoders::EncoderParams<float>& image,
                                         const encoders::EncoderParams<float>& text, const std::string& run_id,
                                         const std::string& digest) {
  Checkpoint ck;
  ck.stage = StageTag::Contrastive;
  ck.run_id = run_id;
  ck.config_digest = digest;
  append_params(ck, "image.", image);
  append_params(ck, "text.", text);
  return ck;
}

struct ContrastiveWeights {
  encoders::EncoderParams<float> image;
  encoders::EncoderParams<float> text;
};

inline ContrastiveWeights contrastive_weights(const Checkpoint& ck) {
  if (ck.stage != StageTag::Contrastive || ck.encoders.size() != 2)
    throw FormatError("expected a contrastive checkpoint with two encoders");
  return {extract_params(ck, "image.", ck.encoders[0]), extract_params(ck, "text.", ck.encoders[1])};
}

// Stage 2 keeps the teacher (the exported E^S), the student and the center.
inline Checkpoint distill_checkpoint(const distill::DistillResult& r, const std::string& run_id,
                                     const std::string& digest) {
  Checkpoint ck;
  ck.stage = StageTag::Distill;
  ck.run_id = run_id;
  ck.config_digest = digest;
  append_params(ck, "teacher.", r.teacher.backbone);
  ck.tensors.push_back({"teacher.head", r.teacher.head});
  append_params(ck, "student.", r.student.backbone);
  ck.tensors.push_back({"student.head", r.student.head});
  ck.tensors.push_back({"center", r.center});
  return ck;
}

inline encoders::EncoderParams<float> fine_encoder(const Checkpoint& ck) {
  if (ck.stage != StageTag::Distill || ck.encoders.empty())
    throw FormatError("expected a distill checkpoint");
  return extract_params(ck, "teacher.", ck.encoders[0]);
}

inline Checkpoint align_checkpoint(const align::AffineMap& map, const std::string& run_id, const std::string& digest) {
  Checkpoint ck;
  ck.stage = StageTag::Align;
  ck.run_id = run_id;
  ck.config_digest = digest;
  ck.tensors.push_back({"align.weight", map.weight.cast<float>()});
  ck.tensors.push_back({"align.bias", map.bias.cast<float>()});
  ck.tensors.push_back({"align.lambda", Tensor<float>::vector({static_cast<float>(map.lambda)})});
  ck.tensors.push_back({"align.fit_mse", Tensor<float>::vector({static_cast<float>(map.fit_mse)})});
  return ck;
}

inline align::AffineMap affine_map(const Checkpoint& ck) {
  if (ck.stage != StageTag::Align) throw FormatError("expected an align checkpoint");
  align::AffineMap m;
  m.weight = ck.get("align.weight").cast<double>();
  m.bias = ck.get("align.bias").cast<double>();
  m.lambda = ck.get("align.lambda")[0];
  m.fit_mse = ck.get("align.fit_mse")[0];
  if (m.weight.rank() != 2 || m.bias.size() != m.weight.cols())
    throw FormatError("align checkpoint: weight and bias shapes disagree");
  return m;
}

}  // namespace agriclip::pipeline
