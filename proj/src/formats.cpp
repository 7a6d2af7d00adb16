#include "scriptoria/formats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <system_error>

namespace scriptoria {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  thread_local std::mt19937_64 rng{std::random_device{}()};
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(rng() & 0xFFFFFF);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::Io, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    fail(ErrorCode::Io, "cannot rename onto '" + path.string() + "': " + ec.message());
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void ByteReader::need(std::size_t n) {
  if (bytes_.size() - pos_ < n) fail(ErrorCode::Format, source_ + ": truncated file");
}

void ByteReader::expect_magic(std::string_view m) {
  need(4);
  if (bytes_.substr(pos_, 4) != m) {
    fail(ErrorCode::Format, source_ + ": bad magic (expected '" + std::string(m) + "')");
  }
  pos_ += 4;
}

std::uint16_t ByteReader::expect_version(std::uint16_t max_supported) {
  const std::uint16_t v = u16();
  if (v == 0 || v > max_supported) {
    fail(ErrorCode::Format, source_ + ": unsupported version " + std::to_string(v));
  }
  return v;
}

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  return std::string(raw(n));
}

std::string_view ByteReader::raw(std::size_t n) {
  need(n);
  auto out = bytes_.substr(pos_, n);
  pos_ += n;
  return out;
}

void ByteReader::expect_end() {
  if (!at_end()) fail(ErrorCode::Format, source_ + ": trailing bytes");
}

namespace {

void check_finite_row(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) fail(ErrorCode::InvalidArgument, what + ": non-finite values");
}

}  // namespace

std::string encode_ldsc(const Matrix& descriptors) {
  check_finite_row(descriptors, "LDSC");
  ByteWriter w;
  w.magic("LDSC");
  w.u16(kLdscVersion);
  w.u32(static_cast<std::uint32_t>(descriptors.rows()));
  w.u32(static_cast<std::uint32_t>(descriptors.cols()));
  for (Eigen::Index r = 0; r < descriptors.rows(); ++r)
    for (Eigen::Index c = 0; c < descriptors.cols(); ++c) w.f32(static_cast<float>(descriptors(r, c)));
  return w.take();
}

Matrix decode_ldsc(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  r.expect_magic("LDSC");
  r.expect_version(kLdscVersion);
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  if (dim == 0) fail(ErrorCode::Format, source + ": zero descriptor dimension");
  if ((bytes.size() - 14) != std::size_t(count) * dim * 4) fail(ErrorCode::Format, source + ": size mismatch");
  Matrix m(count, dim);
  for (std::uint32_t i = 0; i < count; ++i)
    for (std::uint32_t j = 0; j < dim; ++j) m(i, j) = r.f32();
  r.expect_end();
  if (!m.allFinite()) fail(ErrorCode::Format, source + ": non-finite descriptor values");
  return m;
}

void write_ldsc(const fs::path& path, const Matrix& descriptors) {
  write_file_atomic(path, encode_ldsc(descriptors));
}

Matrix read_ldsc(const fs::path& path) { return decode_ldsc(read_file(path), path.string()); }

std::string encode_gdsc(const GlobalDescriptorSet& set) {
  require_dim(set.ids.size(), static_cast<std::size_t>(set.values.rows()), "GDSC ids vs rows");
  check_finite_row(set.values, "GDSC");
  ByteWriter w;
  w.magic("GDSC");
  w.u16(kGdscVersion);
  w.u32(static_cast<std::uint32_t>(set.ids.size()));
  w.u32(static_cast<std::uint32_t>(set.values.cols()));
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    w.str(set.ids[i]);
    for (Eigen::Index c = 0; c < set.values.cols(); ++c) w.f32(static_cast<float>(set.values(i, c)));
  }
  return w.take();
}

GlobalDescriptorSet decode_gdsc(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  r.expect_magic("GDSC");
  r.expect_version(kGdscVersion);
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  GlobalDescriptorSet set;
  set.values.resize(count, dim);
  set.ids.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    set.ids.push_back(r.str());
    for (std::uint32_t j = 0; j < dim; ++j) set.values(i, j) = r.f32();
  }
  r.expect_end();
  return set;
}

void write_gdsc(const fs::path& path, const GlobalDescriptorSet& set) { write_file_atomic(path, encode_gdsc(set)); }

GlobalDescriptorSet read_gdsc(const fs::path& path) { return decode_gdsc(read_file(path), path.string()); }

std::string encode_svmw(const SvmWeights& model) {
  ByteWriter w;
  w.magic("SVMW");
  w.u16(kSvmwVersion);
  w.u32(static_cast<std::uint32_t>(model.w.size()));
  w.f64(model.C);
  for (Eigen::Index i = 0; i < model.w.size(); ++i) w.f32(static_cast<float>(model.w[i]));
  return w.take();
}

SvmWeights decode_svmw(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  r.expect_magic("SVMW");
  r.expect_version(kSvmwVersion);
  SvmWeights m;
  const std::uint32_t dim = r.u32();
  m.C = r.f64();
  m.w.resize(dim);
  for (std::uint32_t i = 0; i < dim; ++i) m.w[i] = r.f32();
  r.expect_end();
  return m;
}

std::string encode_sptc(const PatchBlock& block) {
  if (block.bytes_per_pixel != 1 && block.bytes_per_pixel != 4) {
    fail(ErrorCode::InvalidArgument, "SPTC: bytes per pixel must be 1 or 4");
  }
  const std::size_t per = std::size_t(block.side) * block.side;
  if (per == 0 || block.pixels.size() % per != 0) fail(ErrorCode::Dimension, "SPTC: pixel count not a multiple of side^2");
  ByteWriter w;
  w.magic("SPTC");
  w.u16(kSptcVersion);
  w.u32(static_cast<std::uint32_t>(block.count()));
  w.u16(block.side);
  w.u8(block.bytes_per_pixel);
  for (float v : block.pixels) {
    if (block.bytes_per_pixel == 1) {
      w.u8(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f)));
    } else {
      w.f32(v);
    }
  }
  return w.take();
}

PatchBlock decode_sptc(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  r.expect_magic("SPTC");
  r.expect_version(kSptcVersion);
  const std::uint32_t count = r.u32();
  PatchBlock block;
  block.side = r.u16();
  block.bytes_per_pixel = r.u8();
  if (block.bytes_per_pixel != 1 && block.bytes_per_pixel != 4) {
    fail(ErrorCode::Format, source + ": unsupported bytes per pixel");
  }
  const std::size_t n = std::size_t(count) * block.side * block.side;
  block.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) block.pixels[i] = block.bytes_per_pixel == 1 ? r.u8() / 255.f : r.f32();
  r.expect_end();
  return block;
}

std::string encode_slbl(std::span<const std::uint32_t> labels) {
  ByteWriter w;
  w.magic("SLBL");
  w.u32(static_cast<std::uint32_t>(labels.size()));
  for (auto l : labels) w.u32(l);
  return w.take();
}

std::vector<std::uint32_t> decode_slbl(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  r.expect_magic("SLBL");
  const std::uint32_t count = r.u32();
  std::vector<std::uint32_t> labels(count);
  for (auto& l : labels) l = r.u32();
  r.expect_end();
  return labels;
}

}  // namespace scriptoria
