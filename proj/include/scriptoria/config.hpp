#pragma once

#include "scriptoria/encoding.hpp"
#include "scriptoria/keypoints.hpp"
#include "scriptoria/svm.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace scriptoria {

/// Pipeline stages in dependency order; an artifact's hash covers its stage
/// and every stage before it.
enum class Stage { Extract = 0, Cluster = 1, Encode = 2, Svm = 3 };

struct PipelineConfig {
  // extract
  DetectorParams detector;
  bool binarize = true;
  HellingerOrder hellinger = HellingerOrder::Paper;
  // cluster
  std::size_t pca_dim_local = 32;
  KMeansParams kmeans;  // k = 5000 surrogate classes
  // encode
  EncoderKind encoder = EncoderKind::MVlad;
  std::size_t vlad_k = 100;
  std::size_t n_codebooks = 5;
  std::size_t vlad_sample = 500000;
  std::size_t vlad_epochs = 25;
  double power_rho = 0.5;
  std::size_t mvlad_pca_dim = 0;
  // svm
  int svm_c_min_exp = -5;
  int svm_c_max_exp = 4;
  double svm_c = 0.0;  // 0: select by cross-validation
  std::size_t svm_folds_retrieval = 2;
  std::size_t svm_folds_classification = 5;
  double svm_tolerance = 1e-6;
  std::size_t svm_max_iterations = 1000;
  std::uint64_t seed = 0;

  /// Throws Error(InvalidArgument) naming the offending key.
  void validate() const;

  /// Applies one `key = value` assignment (value is trimmed).
  void set(std::string_view key, std::string_view value);

  /// Sorted `key = value` lines of every field.
  std::string canonical_text() const;
  std::uint64_t stage_hash(Stage stage) const;

  ExtractionParams extraction() const;
  KMeansParams clustering() const;
  MVladParams mvlad() const;
  SvmSelectConfig svm_selection(SelectionMode mode) const;
};

/// Flat `key = value` text; `#` starts a comment. Unknown or repeated keys are errors.
PipelineConfig parse_config(std::string_view text, const std::string& source, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

std::vector<std::string> config_keys();

std::string hash_hex(std::uint64_t h);

}  // namespace scriptoria
