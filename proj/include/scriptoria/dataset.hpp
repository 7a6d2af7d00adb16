#pragma once

#include "scriptoria/core.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace scriptoria {

enum class Split { Train, Test };

std::string_view to_string(Split split);

struct ManifestEntry {
  std::string path;  // relative to DatasetManifest::root unless absolute
  std::string label;
  Split split = Split::Train;
};

/// Minimal RFC-4180 splitter for one line; fields are whitespace-trimmed.
std::vector<std::string> split_csv(std::string_view line);
/// Quotes a field when it contains a comma, quote or newline.
std::string quote_csv(const std::string& s);

/// Sidecar CSV `path,label,split`. Labels are writer / class identities used
/// for evaluation only.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const ManifestEntry& e) const;
  std::vector<std::size_t> indices(Split split) const;
};

/// Parses manifest text. `source` is used in error messages only.
DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& root,
                               const std::string& source = "<manifest>");
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Intensities in [0,1], row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.f);

  float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// 0 = ink, 1 = background.
struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;

  std::uint8_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

GrayImage to_gray(const BinaryImage& img);

/// 8-bit grayscale PGM (P2/P5) or PNG; intensities scaled by 1/255.
GrayImage load_image(const std::filesystem::path& path);
void save_pgm(const GrayImage& img, const std::filesystem::path& path);

/// Histogram bin index t (0..255) such that pixels whose 8-bit bin is < t are
/// ink. Returns 0 when the image occupies a single bin.
int otsu_threshold(const GrayImage& img);
BinaryImage binarize_otsu(const GrayImage& img);

inline constexpr int kPatchSide = 32;
inline constexpr int kPatchPixels = kPatchSide * kPatchSide;

struct Patch {
  std::array<float, kPatchPixels> pixels{};
  std::uint32_t image_index = 0;
  std::uint32_t keypoint_index = 0;
};

struct StandardizedPatch {
  Patch patch;
  bool constant = false;  // input had no variance; pixels are all zero
};

/// Zero mean, unit (population) standard deviation.
StandardizedPatch standardize_patch(const Patch& p);

}  // namespace scriptoria
