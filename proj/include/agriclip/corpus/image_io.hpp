#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "agriclip/errors.hpp"
#include "agriclip/numerics/rng.hpp"
#include "agriclip/numerics/tensor.hpp"

namespace agriclip::io {

// Little-endian byte helpers shared by the image and checkpoint formats.
inline void put_u8(std::vector<unsigned char>& out, std::uint8_t v) { out.push_back(v); }
inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put_f32(std::vector<unsigned char>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void skip(std::size_t n) { take(n); }

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint16_t u16() {
    const auto* p = take(2);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    const auto* p = take(4);
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string text(std::size_t n) {
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source_ + ": " + what + " at offset " + std::to_string(pos_));
  }

 private:
  const unsigned char* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) fail("truncated data (need " + std::to_string(n) + " bytes)");
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  const std::vector<unsigned char>& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::vector<unsigned char> pixel_bytes(const Tensor<float>& image) {
  std::vector<unsigned char> out;
  out.reserve(image.size() * 4);
  for (float v : image.data()) put_f32(out, v);
  return out;
}

// 64-bit hash of the little-endian float payload.
inline std::uint64_t content_hash(const Tensor<float>& image) { return fnv1a64(pixel_bytes(image)); }

// "IMG1", u32 H, W, C, then H*W*C little-endian float32, channel-last.
inline std::vector<unsigned char> encode_image(const Tensor<float>& image) {
  if (image.rank() != 3) throw ParameterError("encode_image: expected an H x W x C tensor");
  std::vector<unsigned char> out = {'I', 'M', 'G', '1'};
  for (auto d : image.dims()) put_u32(out, static_cast<std::uint32_t>(d));
  const auto payload = pixel_bytes(image);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline Tensor<float> decode_image(const std::vector<unsigned char>& bytes, const std::string& source) {
  ByteReader r(bytes, source);
  if (r.text(4) != "IMG1") r.fail("bad image magic");
  const std::size_t h = r.u32(), w = r.u32(), c = r.u32();
  if (h == 0 || w == 0 || c == 0) r.fail("zero image extent");
  std::vector<float> data(h * w * c);
  for (auto& v : data) v = r.f32();
  if (!r.at_end()) r.fail("trailing bytes after image payload");
  return Tensor<float>({h, w, c}, std::move(data));
}

inline void save_image(const std::filesystem::path& path, const Tensor<float>& image) {
  write_file(path, encode_image(image));
}

inline Tensor<float> load_image(const std::filesystem::path& path) {
  return decode_image(read_file(path), path.string());
}

}  // namespace agriclip::io
