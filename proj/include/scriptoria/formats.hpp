#pragma once

// Little-endian binary artifacts. Every format starts with a 4-byte magic;
// all but SLBL follow it with a u16 version.

#include "scriptoria/core.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scriptoria {

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

class ByteWriter {
 public:
  void magic(std::string_view m) { bytes_.append(m.data(), 4); }
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put(v); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.append(s);
  }
  void raw(std::string_view s) { bytes_.append(s); }

  const std::string& bytes() const { return bytes_; }
  std::string take() { return std::move(bytes_); }

 private:
  template <typename T>
  void put(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string bytes_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  void expect_magic(std::string_view m);
  std::uint16_t expect_version(std::uint16_t max_supported);

  std::uint8_t u8() { return static_cast<std::uint8_t>(get<std::uint8_t>()); }
  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string str();
  std::string_view raw(std::size_t n);

  bool at_end() const { return pos_ == bytes_.size(); }
  void expect_end();
  const std::string& source() const { return source_; }

 private:
  void need(std::size_t n);
  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string source_;
};

// --- LDSC: per-image local descriptors -------------------------------------
// "LDSC" u16 version u32 count u32 dim f32[count*dim] row-major

inline constexpr std::uint16_t kLdscVersion = 1;

std::string encode_ldsc(const Matrix& descriptors);
Matrix decode_ldsc(std::string_view bytes, const std::string& source);
void write_ldsc(const std::filesystem::path& path, const Matrix& descriptors);
Matrix read_ldsc(const std::filesystem::path& path);

// --- GDSC: global descriptors ------------------------------------------------
// "GDSC" u16 version u32 count u32 dim, then per record: u32 id length,
// UTF-8 id bytes, f32[dim]

inline constexpr std::uint16_t kGdscVersion = 1;

struct GlobalDescriptorSet {
  std::vector<std::string> ids;
  Matrix values;  // one row per id
};

std::string encode_gdsc(const GlobalDescriptorSet& set);
GlobalDescriptorSet decode_gdsc(std::string_view bytes, const std::string& source);
void write_gdsc(const std::filesystem::path& path, const GlobalDescriptorSet& set);
GlobalDescriptorSet read_gdsc(const std::filesystem::path& path);

// --- SVMW: linear SVM weights -------------------------------------------------
// "SVMW" u16 version u32 dim f64 C f32[dim]

inline constexpr std::uint16_t kSvmwVersion = 1;

struct SvmWeights {
  double C = 0.0;
  Vector w;
};

std::string encode_svmw(const SvmWeights& model);
SvmWeights decode_svmw(std::string_view bytes, const std::string& source);

// --- SPTC: 32x32 patches -------------------------------------------------------
// "SPTC" u16 version u32 count u16 side u8 bytes-per-pixel, then row-major
// pixels. 1 byte/px stores round(255*v) of [0,1] values (binary patches are
// 0/255); 4 bytes/px stores f32 (standardized gray patches).

inline constexpr std::uint16_t kSptcVersion = 1;

struct PatchBlock {
  std::uint16_t side = 32;
  std::uint8_t bytes_per_pixel = 1;
  std::vector<float> pixels;  // count * side * side, values as stored semantics

  std::size_t count() const { return side == 0 ? 0 : pixels.size() / (std::size_t(side) * side); }
};

std::string encode_sptc(const PatchBlock& block);
PatchBlock decode_sptc(std::string_view bytes, const std::string& source);

// --- SLBL: surrogate labels ----------------------------------------------------
// "SLBL" u32 count u32[count]

std::string encode_slbl(std::span<const std::uint32_t> labels);
std::vector<std::uint32_t> decode_slbl(std::string_view bytes, const std::string& source);

}  // namespace scriptoria
