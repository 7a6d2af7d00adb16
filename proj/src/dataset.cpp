#include "scriptoria/dataset.hpp"

#include "scriptoria/formats.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <unordered_set>

namespace scriptoria {

namespace fs = std::filesystem;

std::string_view to_string(Split split) { return split == Split::Train ? "train" : "test"; }

fs::path DatasetManifest::resolve(const ManifestEntry& e) const {
  fs::path p(e.path);
  return p.is_absolute() ? p : root / p;
}

std::vector<std::size_t> DatasetManifest::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].split == split) out.push_back(i);
  return out;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

DatasetManifest parse_manifest(std::string_view text, const fs::path& root, const std::string& source) {
  DatasetManifest m;
  m.root = root;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  bool first_record = true;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    auto fields = split_csv(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (first_record) {
      first_record = false;
      if (fields.size() == 3 && fields[0] == "path" && fields[1] == "label" && fields[2] == "split") continue;
    }
    if (fields.size() != 3) {
      fail(ErrorCode::Format, where + ": expected 3 fields (path,label,split), got " + std::to_string(fields.size()));
    }
    ManifestEntry e;
    e.path = fields[0];
    e.label = fields[1];
    if (fields[2] == "train") {
      e.split = Split::Train;
    } else if (fields[2] == "test") {
      e.split = Split::Test;
    } else {
      fail(ErrorCode::Format, where + ": unknown split '" + fields[2] + "' (expected train or test)");
    }
    if (e.path.empty()) fail(ErrorCode::Format, where + ": empty path");
    if (e.label.empty()) fail(ErrorCode::Format, where + ": empty label");
    if (!seen.insert(e.path).second) fail(ErrorCode::Format, where + ": duplicate path '" + e.path + "'");
    m.entries.push_back(std::move(e));
    if (end == text.size()) break;
  }
  if (m.entries.empty()) fail(ErrorCode::Format, source + ": empty manifest");
  return m;
}

DatasetManifest load_manifest(const fs::path& path) {
  const std::string text = read_file(path);
  return parse_manifest(text, path.parent_path(), path.string());
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::string out = "path,label,split\n";
  for (const auto& e : manifest.entries) {
    out += quote_csv(e.path) + "," + quote_csv(e.label) + "," + std::string(to_string(e.split)) + "\n";
  }
  return out;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  write_file_atomic(path, format_manifest(manifest));
}

GrayImage::GrayImage(int w, int h, float fill)
    : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

GrayImage to_gray(const BinaryImage& img) {
  GrayImage out(img.width, img.height);
  std::transform(img.values.begin(), img.values.end(), out.values.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v); });
  return out;
}

namespace {

GrayImage load_pgm(const fs::path& path, const std::string& bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t b = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(b, pos - b);
  };
  const std::string magic = next_token();
  if (magic != "P5" && magic != "P2") fail(ErrorCode::Format, path.string() + ": not a grayscale PGM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    fail(ErrorCode::Format, path.string() + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    fail(ErrorCode::Format, path.string() + ": unsupported PGM geometry or bit depth");
  }
  GrayImage img(w, h);
  const float scale = 1.f / 255.f * (255.f / static_cast<float>(maxval));
  if (magic == "P5") {
    ++pos;  // single whitespace after maxval
    if (bytes.size() < pos + img.values.size()) fail(ErrorCode::Format, path.string() + ": truncated PGM");
    for (std::size_t i = 0; i < img.values.size(); ++i)
      img.values[i] = static_cast<unsigned char>(bytes[pos + i]) * scale;
  } else {
    for (auto& v : img.values) {
      const std::string t = next_token();
      if (t.empty()) fail(ErrorCode::Format, path.string() + ": truncated PGM");
      v = std::stoi(t) * scale;
    }
  }
  return img;
}

GrayImage load_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    fail(ErrorCode::Format, path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    fail(ErrorCode::Format, path.string() + ": " + image.message);
  }
  GrayImage img(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < img.values.size(); ++i) img.values[i] = buffer[i] / 255.f;
  return img;
}

}  // namespace

GrayImage load_image(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 8 && static_cast<unsigned char>(bytes[0]) == 0x89 && bytes.compare(1, 3, "PNG") == 0) {
    return load_png(path);
  }
  return load_pgm(path, bytes);
}

void save_pgm(const GrayImage& img, const fs::path& path) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.values.size());
  for (float v : img.values) {
    out += static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f)));
  }
  write_file_atomic(path, out);
}

namespace {

int to_bin(float v) { return static_cast<int>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f)); }

}  // namespace

int otsu_threshold(const GrayImage& img) {
  std::array<double, 256> hist{};
  for (float v : img.values) hist[to_bin(v)] += 1.0;
  const double total = static_cast<double>(img.values.size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];

  // Class 0 = bins [0, t), class 1 = bins [t, 255].
  double w0 = 0.0, sum0 = 0.0, best = 0.0;
  int best_t = 0;
  for (int t = 1; t < 256; ++t) {
    w0 += hist[t - 1];
    sum0 += (t - 1) * hist[t - 1];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

BinaryImage binarize_otsu(const GrayImage& img) {
  const int t = otsu_threshold(img);
  BinaryImage out{img.width, img.height, std::vector<std::uint8_t>(img.values.size(), 1)};
  if (t == 0) return out;
  for (std::size_t i = 0; i < img.values.size(); ++i) out.values[i] = to_bin(img.values[i]) < t ? 0 : 1;
  return out;
}

StandardizedPatch standardize_patch(const Patch& p) {
  StandardizedPatch out;
  out.patch.image_index = p.image_index;
  out.patch.keypoint_index = p.keypoint_index;
  double mean = 0.0;
  for (float v : p.pixels) mean += v;
  mean /= kPatchPixels;
  double var = 0.0;
  for (float v : p.pixels) var += (v - mean) * (v - mean);
  var /= kPatchPixels;
  const double sd = std::sqrt(var);
  if (sd <= 1e-12) {
    out.constant = true;
    out.patch.pixels.fill(0.f);
    return out;
  }
  for (int i = 0; i < kPatchPixels; ++i) out.patch.pixels[i] = static_cast<float>((p.pixels[i] - mean) / sd);
  return out;
}

}  // namespace scriptoria
