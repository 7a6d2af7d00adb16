#include "scriptoria/config.hpp"

#include "scriptoria/formats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>

namespace scriptoria {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  fail(ErrorCode::InvalidArgument,
       "config key '" + std::string(key) + "': invalid value '" + std::string(value) + "' (expected " + expected + ")");
}

template <typename T>
T parse_number(std::string_view key, std::string_view v, const char* expected) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, expected);
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true or false");
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

struct Key {
  const char* name;
  Stage stage;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, std::string_view)> set;
};

#define SC_SIZE(NAME, STAGE, FIELD)                                                          \
  Key {                                                                                      \
    NAME, STAGE, [](const PipelineConfig& c) { return fmt(std::size_t(c.FIELD)); },          \
        [](PipelineConfig& c, std::string_view v) {                                          \
          c.FIELD = parse_number<std::size_t>(NAME, v, "a non-negative integer");            \
        }                                                                                    \
  }
#define SC_INT(NAME, STAGE, FIELD)                                                                      \
  Key {                                                                                                 \
    NAME, STAGE, [](const PipelineConfig& c) { return fmt(int(c.FIELD)); },                             \
        [](PipelineConfig& c, std::string_view v) { c.FIELD = parse_number<int>(NAME, v, "an integer"); } \
  }
#define SC_REAL(NAME, STAGE, FIELD)                                                                   \
  Key {                                                                                               \
    NAME, STAGE, [](const PipelineConfig& c) { return fmt(double(c.FIELD)); },                        \
        [](PipelineConfig& c, std::string_view v) { c.FIELD = parse_number<double>(NAME, v, "a number"); } \
  }
#define SC_BOOL(NAME, STAGE, FIELD)                                                                         \
  Key {                                                                                                     \
    NAME, STAGE, [](const PipelineConfig& c) { return fmt(bool(c.FIELD)); },                                \
        [](PipelineConfig& c, std::string_view v) { c.FIELD = parse_bool(NAME, v); }                        \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"mode", Stage::Extract,
          [](const PipelineConfig& c) {
            return std::string(c.detector.mode == DetectorMode::Restricted ? "restricted" : "full");
          },
          [](PipelineConfig& c, std::string_view v) {
            if (v == "restricted") c.detector.mode = DetectorMode::Restricted;
            else if (v == "full") c.detector.mode = DetectorMode::Full;
            else bad_value("mode", v, "restricted or full");
          }},
      SC_BOOL("binarize", Stage::Extract, binarize),
      Key{"hellinger_order", Stage::Extract,
          [](const PipelineConfig& c) { return std::string(c.hellinger == HellingerOrder::Paper ? "paper" : "rootsift"); },
          [](PipelineConfig& c, std::string_view v) {
            if (v == "paper") c.hellinger = HellingerOrder::Paper;
            else if (v == "rootsift") c.hellinger = HellingerOrder::RootSift;
            else bad_value("hellinger_order", v, "paper or rootsift");
          }},
      SC_INT("octaves", Stage::Extract, detector.octaves),
      SC_INT("scales_per_octave", Stage::Extract, detector.scales_per_octave),
      SC_REAL("base_sigma", Stage::Extract, detector.base_sigma),
      SC_REAL("input_sigma", Stage::Extract, detector.input_sigma),
      SC_REAL("contrast_threshold", Stage::Extract, detector.contrast_threshold),
      SC_REAL("edge_ratio", Stage::Extract, detector.edge_ratio),
      SC_INT("border", Stage::Extract, detector.border),
      SC_SIZE("pca_dim_local", Stage::Cluster, pca_dim_local),
      SC_SIZE("kmeans_k", Stage::Cluster, kmeans.k),
      SC_SIZE("kmeans_batch", Stage::Cluster, kmeans.batch_size),
      SC_SIZE("kmeans_epochs", Stage::Cluster, kmeans.epochs),
      SC_SIZE("kmeans_sample", Stage::Cluster, kmeans.sample_size),
      SC_REAL("ratio_max", Stage::Cluster, kmeans.ratio_max),
      Key{"encoder", Stage::Encode,
          [](const PipelineConfig& c) {
            switch (c.encoder) {
              case EncoderKind::Sum: return std::string("sum");
              case EncoderKind::Vlad: return std::string("vlad");
              case EncoderKind::MVlad: break;
            }
            return std::string("mvlad");
          },
          [](PipelineConfig& c, std::string_view v) {
            if (v == "sum") c.encoder = EncoderKind::Sum;
            else if (v == "vlad") c.encoder = EncoderKind::Vlad;
            else if (v == "mvlad") c.encoder = EncoderKind::MVlad;
            else bad_value("encoder", v, "sum, vlad or mvlad");
          }},
      SC_SIZE("vlad_k", Stage::Encode, vlad_k),
      SC_SIZE("n_codebooks", Stage::Encode, n_codebooks),
      SC_SIZE("vlad_sample", Stage::Encode, vlad_sample),
      SC_SIZE("vlad_epochs", Stage::Encode, vlad_epochs),
      SC_REAL("power_rho", Stage::Encode, power_rho),
      SC_SIZE("mvlad_pca_dim", Stage::Encode, mvlad_pca_dim),
      SC_INT("svm_c_min_exp", Stage::Svm, svm_c_min_exp),
      SC_INT("svm_c_max_exp", Stage::Svm, svm_c_max_exp),
      SC_REAL("svm_c", Stage::Svm, svm_c),
      SC_SIZE("svm_folds_retrieval", Stage::Svm, svm_folds_retrieval),
      SC_SIZE("svm_folds_classification", Stage::Svm, svm_folds_classification),
      SC_REAL("svm_tolerance", Stage::Svm, svm_tolerance),
      SC_SIZE("svm_max_iterations", Stage::Svm, svm_max_iterations),
      Key{"seed", Stage::Extract, [](const PipelineConfig& c) { return std::to_string(c.seed); },
          [](PipelineConfig& c, std::string_view v) {
            c.seed = parse_number<std::uint64_t>("seed", v, "a non-negative integer");
          }},
  };
  return table;
}

#undef SC_SIZE
#undef SC_INT
#undef SC_REAL
#undef SC_BOOL

void require(bool ok, const char* key, const std::string& what) {
  if (!ok) fail(ErrorCode::InvalidArgument, std::string("config key '") + key + "': " + what);
}

}  // namespace

void PipelineConfig::validate() const {
  try {
    detector.validate();
  } catch (const Error& e) {
    fail(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  require(pca_dim_local >= 1 && pca_dim_local <= 128, "pca_dim_local", "must be in [1, 128]");
  require(kmeans.k >= 1, "kmeans_k", "must be >= 1");
  require(kmeans.batch_size >= 1, "kmeans_batch", "must be >= 1");
  require(kmeans.epochs >= 1, "kmeans_epochs", "must be >= 1");
  require(kmeans.sample_size >= 1, "kmeans_sample", "must be >= 1");
  require(kmeans.ratio_max > 0.0 && kmeans.ratio_max <= 1.0, "ratio_max", "must be in (0, 1]");
  require(vlad_k >= 1, "vlad_k", "must be >= 1");
  require(n_codebooks >= 1, "n_codebooks", "must be >= 1");
  require(vlad_sample >= 1, "vlad_sample", "must be >= 1");
  require(vlad_epochs >= 1, "vlad_epochs", "must be >= 1");
  require(power_rho > 0.0 && power_rho <= 1.0, "power_rho", "must be in (0, 1]");
  require(svm_c_min_exp <= svm_c_max_exp, "svm_c_min_exp", "must not exceed svm_c_max_exp");
  require(svm_c >= 0.0 && std::isfinite(svm_c), "svm_c", "must be >= 0 (0 selects by cross-validation)");
  require(svm_folds_retrieval >= 2, "svm_folds_retrieval", "must be >= 2");
  require(svm_folds_classification >= 2, "svm_folds_classification", "must be >= 2");
  require(svm_tolerance > 0.0, "svm_tolerance", "must be > 0");
  require(svm_max_iterations >= 1, "svm_max_iterations", "must be >= 1");
}

void PipelineConfig::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const auto& k : keys()) {
    if (key == k.name) {
      k.set(*this, value);
      return;
    }
  }
  fail(ErrorCode::InvalidArgument, "unknown config key '" + std::string(key) + "'");
}

std::string PipelineConfig::canonical_text() const {
  std::vector<std::string> lines;
  for (const auto& k : keys()) lines.push_back(std::string(k.name) + " = " + k.get(*this));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::uint64_t PipelineConfig::stage_hash(Stage stage) const {
  std::vector<std::string> lines;
  for (const auto& k : keys()) {
    if (static_cast<int>(k.stage) <= static_cast<int>(stage)) lines.push_back(std::string(k.name) + "=" + k.get(*this));
  }
  std::sort(lines.begin(), lines.end());
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  return fnv1a64(text);
}

ExtractionParams PipelineConfig::extraction() const {
  ExtractionParams p;
  p.detector = detector;
  p.hellinger = hellinger;
  p.standardize_patches = !binarize;
  return p;
}

KMeansParams PipelineConfig::clustering() const {
  KMeansParams p = kmeans;
  p.seed = seed;
  return p;
}

MVladParams PipelineConfig::mvlad() const {
  MVladParams p;
  p.n_codebooks = n_codebooks;
  p.kmeans.k = vlad_k;
  p.kmeans.sample_size = vlad_sample;
  p.kmeans.epochs = vlad_epochs;
  p.kmeans.batch_size = kmeans.batch_size;
  p.kmeans.seed = seed;
  p.power.rho = power_rho;
  p.pca_dim = mvlad_pca_dim;
  return p;
}

SvmSelectConfig PipelineConfig::svm_selection(SelectionMode mode) const {
  SvmSelectConfig s;
  s.grid = log_grid(svm_c_min_exp, svm_c_max_exp);
  s.mode = mode;
  s.folds = mode == SelectionMode::Retrieval ? svm_folds_retrieval : svm_folds_classification;
  s.seed = seed;
  s.solver.tolerance = svm_tolerance;
  s.solver.max_iterations = svm_max_iterations;
  return s;
}

PipelineConfig parse_config(std::string_view text, const std::string& source, PipelineConfig base) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) fail(ErrorCode::InvalidArgument, where + "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    if (!seen.insert(key).second) fail(ErrorCode::InvalidArgument, where + "duplicate key '" + key + "'");
    try {
      base.set(key, line.substr(eq + 1));
    } catch (const Error& e) {
      fail(e.code(), where + e.what());
    }
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  return parse_config(read_file(path), path.string(), std::move(base));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.emplace_back(k.name);
  return out;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace scriptoria
