#pragma once

#include "scriptoria/core.hpp"
#include "scriptoria/dataset.hpp"
#include "scriptoria/formats.hpp"
#include "scriptoria/random.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace scriptoria {

struct KMeansParams {
  std::size_t k = 5000;
  std::size_t batch_size = 1024;
  std::size_t epochs = 25;
  std::size_t sample_size = 500000;
  std::uint64_t seed = 0;
  double ratio_max = 0.9;
  double movement_tolerance = 1e-4;  // early stop on max center movement per epoch
};

struct Codebook {
  Matrix centers;                      // K x d
  std::vector<std::uint64_t> counts;   // assignment tallies on the fitting data
  std::uint64_t seed = 0;

  std::size_t k() const { return static_cast<std::size_t>(centers.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(centers.cols()); }
};

/// k-means++ D^2 seeding over the given rows.
Matrix kmeanspp_seed(const Matrix& X, std::size_t k, Rng& rng);

/// Sculley-style mini-batch k-means: per-center learning rate 1/count, fixed
/// epoch budget with a center-movement early stop, empty centers re-seeded.
Codebook minibatch_kmeans(const Matrix& X, const KMeansParams& params);

/// Sorted indices of `count` rows drawn without replacement from [0, n).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, std::uint64_t seed);
Matrix gather_rows(const Matrix& X, std::span<const std::size_t> rows);

struct Assignment {
  std::uint32_t idx1 = 0;
  std::uint32_t idx2 = 0;
  double d1 = 0.0;
  double d2 = 0.0;
  double ratio = 0.0;  // d1/d2; 0 for K = 1 or d1 = 0
};

/// Exact nearest / second-nearest by Euclidean distance; ties go to the lower index.
Assignment assign_nearest(std::span<const double> x, const Codebook& cb);
std::vector<Assignment> assign_all(const Matrix& X, const Codebook& cb);

/// keep[i] = ratio_i <= ratio_max
std::vector<std::uint8_t> ratio_filter(std::span<const Assignment> assignments, double ratio_max);

struct PatchMeta {
  std::string image;
  std::uint32_t keypoint = 0;
};

struct SurrogateDataset {
  std::uint8_t bytes_per_pixel = 1;
  std::vector<float> pixels;  // N x 32 x 32
  std::vector<std::uint32_t> labels;
  std::vector<PatchMeta> meta;
  std::vector<std::uint64_t> class_histogram;   // size K
  std::vector<std::uint32_t> empty_classes;

  std::size_t size() const { return labels.size(); }
  std::size_t populated_classes() const { return class_histogram.size() - empty_classes.size(); }
};

/// Keeps rows whose mask entry is nonzero; label = idx1. Patches are given as a
/// flat N x 32 x 32 buffer aligned with `meta` and `assignments`.
SurrogateDataset build_surrogate_dataset(std::span<const float> patches, std::span<const PatchMeta> meta,
                                         std::span<const Assignment> assignments,
                                         std::span<const std::uint8_t> mask, std::size_t k,
                                         std::uint8_t bytes_per_pixel = 1);

/// Writes patches.bin (SPTC), labels.bin (SLBL), meta.csv and histogram.csv.
void export_surrogate_dataset(const SurrogateDataset& ds, const std::filesystem::path& dir);

void write_codebook(ByteWriter& w, const Codebook& cb);
Codebook read_codebook(ByteReader& r);

}  // namespace scriptoria
