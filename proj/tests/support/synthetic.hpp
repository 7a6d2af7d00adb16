#pragma once

#include "scriptoria/core.hpp"
#include "scriptoria/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace scriptoria::testing {

/// One document per entry: n x dim descriptors drawn from its writer's
/// Gaussian mixture plus a share of descriptors from background components
/// common to every writer.
struct ScribeSet {
  std::vector<Matrix> documents;
  std::vector<std::string> writers;
  std::vector<std::string> ids;
};

struct ScribeParams {
  std::size_t writers = 50;
  std::size_t documents_per_writer = 5;
  std::size_t descriptors_per_document = 300;
  std::size_t dim = 32;
  std::size_t components = 10;
  double sigma = 0.15;
  double background_share = 0.1;
  std::size_t background_components = 10;
  std::string writer_prefix = "w";
};

struct ScribeBenchmark {
  ScribeSet train;
  ScribeSet test;
};

/// Disjoint train (100 writers) and test (50 writers) splits sharing one
/// background pool, all derived from `seed`.
ScribeBenchmark make_scribe_benchmark(std::uint64_t seed, std::size_t train_writers = 100,
                                      std::size_t test_writers = 50);

ScribeSet make_scribes(const ScribeParams& params, const Matrix& background, std::uint64_t seed);
Matrix make_background(std::size_t components, std::size_t dim, std::uint64_t seed);

/// Bright page with Gaussian blobs (std `radius`) at the given centers; dark
/// blobs by default, bright blobs on a dark page otherwise.
GrayImage blob_image(int width, int height, const std::vector<std::pair<double, double>>& centers, double radius,
                     bool dark_on_bright = true);

/// A small page of pen-like strokes whose shapes depend on `style`.
GrayImage scribble_page(int width, int height, std::uint64_t style, std::uint64_t variation);

/// Writes scribble pages as PGMs plus `manifest.csv` into `dir`. Train writers
/// are named t<i>, test writers q<i>; returns the manifest path.
struct CorpusParams {
  std::size_t train_writers = 4;
  std::size_t test_writers = 4;
  std::size_t pages_per_writer = 3;
  int side = 160;
  std::uint64_t seed = 0;
};
std::filesystem::path write_scribble_corpus(const std::filesystem::path& dir, const CorpusParams& params);

/// Small-scale pipeline settings that keep a full run within seconds.
std::string fast_config_text();

}  // namespace scriptoria::testing
