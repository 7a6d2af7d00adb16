#pragma once

#include "scriptoria/config.hpp"
#include "scriptoria/dataset.hpp"
#include "scriptoria/formats.hpp"
#include "scriptoria/retrieval.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace scriptoria {

enum class LogLevel { Info = 0, Warning = 1 };
using Logger = std::function<void(LogLevel, const std::string&)>;

/// File-name stem for a manifest path: directories joined by "__", extension
/// dropped, characters outside [A-Za-z0-9._-] replaced by '_'.
std::string image_stem(const std::string& manifest_path);

struct StoreEntry {
  std::string id;  // manifest path
  std::string label;
  Split split = Split::Train;
  std::string stem;
  std::size_t count = 0;
  std::size_t dim = 0;
};

/// A directory of per-image local descriptors: index.csv, store.cfg and
/// <stem>.ldsc (+ <stem>.kp.csv and <stem>.sptc when produced by extraction).
struct FeatureStore {
  std::filesystem::path dir;
  std::uint64_t config_hash = 0;
  std::vector<StoreEntry> entries;

  std::filesystem::path descriptors_path(const StoreEntry& e) const { return dir / (e.stem + ".ldsc"); }
  std::filesystem::path keypoints_path(const StoreEntry& e) const { return dir / (e.stem + ".kp.csv"); }
  std::filesystem::path patches_path(const StoreEntry& e) const { return dir / (e.stem + ".sptc"); }
  Matrix load(const StoreEntry& e) const;
  std::size_t dim() const;
};

FeatureStore read_store(const std::filesystem::path& dir);
void write_store_index(const FeatureStore& store, const PipelineConfig& cfg);

/// `config_hash = <hex>` / `stage = <name>` header followed by the canonical config.
std::string config_sidecar(const PipelineConfig& cfg, Stage stage);
/// Hash recorded in a sidecar; nullopt when the file does not exist.
std::optional<std::uint64_t> read_sidecar_hash(const std::filesystem::path& path);

struct ExtractStats {
  std::size_t images = 0;
  std::size_t keypoints = 0;
  std::size_t skipped = 0;
};

ExtractStats run_extract(const PipelineConfig& cfg, const std::filesystem::path& manifest,
                         const std::filesystem::path& out_dir, const Logger& log);

void run_import_features(const PipelineConfig& cfg, const std::filesystem::path& manifest,
                         const std::filesystem::path& src_dir, const std::filesystem::path& out_dir,
                         const std::filesystem::path* reference_store, const Logger& log);

/// Local PCA whitening plus the surrogate-class codebook.
struct SurrogateCodebook {
  std::uint64_t config_hash = 0;
  WhiteningTransform pca;
  Codebook codebook;
};

std::string encode_surrogate_codebook(const SurrogateCodebook& cb);
SurrogateCodebook decode_surrogate_codebook(std::string_view bytes, const std::string& source);

struct ClusterStats {
  std::size_t descriptors = 0;
  std::size_t kept = 0;
  std::size_t populated = 0;
};

ClusterStats run_cluster(const PipelineConfig& cfg, const std::filesystem::path& store_dir,
                         const std::filesystem::path& codebook_path, const std::filesystem::path* surrogate_dir,
                         const Logger& log);
ClusterStats run_export_surrogates(const PipelineConfig& cfg, const std::filesystem::path& store_dir,
                                   const std::filesystem::path& codebook_path, const std::filesystem::path& out_dir,
                                   const Logger& log);

void run_fit_encoder(const PipelineConfig& cfg, const std::filesystem::path& store_dir,
                     const std::filesystem::path& model_path, const Logger& log);
EncoderModel load_encoder(const std::filesystem::path& path);
void run_encode(const PipelineConfig& cfg, const std::filesystem::path& store_dir,
                const std::filesystem::path& model_path, const std::filesystem::path& out_path, const Logger& log);

struct RetrievalOutcome {
  EvalReport report;
  bool esvm = false;
  double svm_c = 0.0;
  std::uint64_t config_hash = 0;

  std::string json() const;
  std::string table() const;
};

RetrievalOutcome run_evaluate(const PipelineConfig& cfg, const std::filesystem::path& gdsc_path,
                              const std::filesystem::path& manifest, bool esvm, const Logger& log);

struct ClassificationOutcome {
  double accuracy = 0.0;
  double svm_c = 0.0;
  std::uint64_t config_hash = 0;
  std::vector<std::string> ids;
  std::vector<std::string> truth;
  std::vector<std::string> predicted;

  std::string json() const;
  std::string table() const;
};

ClassificationOutcome run_classify(const PipelineConfig& cfg, const std::filesystem::path& gdsc_path,
                                   const std::filesystem::path& manifest, const Logger& log);

}  // namespace scriptoria
