#include "scriptoria/pipeline.hpp"

#include "scriptoria/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

namespace scriptoria {

namespace fs = std::filesystem;

namespace {

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Extract: return "extract";
    case Stage::Cluster: return "cluster";
    case Stage::Encode: return "encode";
    case Stage::Svm: return "svm";
  }
  return "?";
}

void info(const Logger& log, const std::string& msg) {
  if (log) log(LogLevel::Info, msg);
}

void check_hash(const Logger& log, const std::string& what, std::uint64_t found, std::uint64_t expected) {
  if (found != expected && log) {
    log(LogLevel::Warning, what + " was built with config hash " + hash_hex(found) +
                               " but the current config hashes to " + hash_hex(expected));
  }
}

Split parse_split(const std::string& s, const std::string& where) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  fail(ErrorCode::Format, where + ": unknown split '" + s + "'");
}

std::size_t parse_size(const std::string& s, const std::string& where) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) fail(ErrorCode::Format, where + ": expected an integer, got '" + s + "'");
  return static_cast<std::size_t>(v);
}

void check_unique_stems(const std::vector<StoreEntry>& entries) {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.stem).second) {
      fail(ErrorCode::InvalidArgument, "two manifest paths map to the same file stem '" + e.stem + "'");
    }
  }
}

std::vector<StoreEntry> entries_from_manifest(const DatasetManifest& m) {
  std::vector<StoreEntry> out;
  for (const auto& e : m.entries) {
    StoreEntry s;
    s.id = e.path;
    s.label = e.label;
    s.split = e.split;
    s.stem = image_stem(e.path);
    out.push_back(std::move(s));
  }
  check_unique_stems(out);
  return out;
}

std::vector<const StoreEntry*> train_entries(const FeatureStore& store) {
  std::vector<const StoreEntry*> out;
  for (const auto& e : store.entries) {
    if (e.split == Split::Train) out.push_back(&e);
  }
  if (out.empty()) fail(ErrorCode::InvalidArgument, store.dir.string() + ": no train-split images");
  return out;
}

void check_store_hash(const FeatureStore& store, const PipelineConfig& cfg, const Logger& log) {
  check_hash(log, "feature store " + store.dir.string(), store.config_hash, cfg.stage_hash(Stage::Extract));
}

}  // namespace

std::string image_stem(const std::string& manifest_path) {
  fs::path p = fs::path(manifest_path).lexically_normal();
  p.replace_extension();
  std::string out;
  bool first = true;
  for (const auto& part : p) {
    const std::string s = part.string();
    if (s.empty() || s == "/") continue;
    if (!first) out += "__";
    first = false;
    for (char c : s) {
      const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                      c == '_' || c == '-';
      out += ok ? c : '_';
    }
  }
  if (out.empty()) fail(ErrorCode::InvalidArgument, "cannot derive a file name from path '" + manifest_path + "'");
  return out;
}

Matrix FeatureStore::load(const StoreEntry& e) const {
  Matrix m = read_ldsc(descriptors_path(e));
  if (static_cast<std::size_t>(m.rows()) != e.count || (e.count > 0 && static_cast<std::size_t>(m.cols()) != e.dim)) {
    fail(ErrorCode::Format, descriptors_path(e).string() + ": " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + " does not match the store index (" +
                                std::to_string(e.count) + "x" + std::to_string(e.dim) + ")");
  }
  return m;
}

std::size_t FeatureStore::dim() const {
  for (const auto& e : entries) {
    if (e.count > 0) return e.dim;
  }
  return entries.empty() ? 0 : entries.front().dim;
}

std::string config_sidecar(const PipelineConfig& cfg, Stage stage) {
  return "config_hash = " + hash_hex(cfg.stage_hash(stage)) + "\nstage = " + stage_name(stage) + "\n" +
         cfg.canonical_text();
}

std::optional<std::uint64_t> read_sidecar_hash(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  const std::string text = read_file(path);
  const std::string key = "config_hash = ";
  if (text.compare(0, key.size(), key) != 0 || text.size() < key.size() + 16) {
    fail(ErrorCode::Format, path.string() + ": missing config_hash line");
  }
  try {
    return std::stoull(text.substr(key.size(), 16), nullptr, 16);
  } catch (const std::exception&) {
    fail(ErrorCode::Format, path.string() + ": malformed config_hash");
  }
}

FeatureStore read_store(const fs::path& dir) {
  const fs::path index = dir / "index.csv";
  if (!fs::exists(index)) fail(ErrorCode::Io, dir.string() + ": not a feature store (index.csv missing)");
  FeatureStore store;
  store.dir = dir;
  store.config_hash = read_sidecar_hash(dir / "store.cfg").value_or(0);
  const std::string text = read_file(index);
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::string where = index.string() + ":" + std::to_string(line_no);
    const auto f = split_csv(line);
    if (line_no == 1) {
      if (f != std::vector<std::string>{"id", "label", "split", "stem", "count", "dim"}) {
        fail(ErrorCode::Format, where + ": unexpected header");
      }
      continue;
    }
    if (f.size() != 6) fail(ErrorCode::Format, where + ": expected 6 fields");
    store.entries.push_back({f[0], f[1], parse_split(f[2], where), f[3], parse_size(f[4], where), parse_size(f[5], where)});
  }
  if (store.entries.empty()) fail(ErrorCode::Format, index.string() + ": empty store");
  return store;
}

void write_store_index(const FeatureStore& store, const PipelineConfig& cfg) {
  std::string out = "id,label,split,stem,count,dim\n";
  for (const auto& e : store.entries) {
    out += quote_csv(e.id) + "," + quote_csv(e.label) + "," + std::string(to_string(e.split)) + "," + e.stem + "," +
           std::to_string(e.count) + "," + std::to_string(e.dim) + "\n";
  }
  write_file_atomic(store.dir / "store.cfg", config_sidecar(cfg, Stage::Extract));
  write_file_atomic(store.dir / "index.csv", out);
}

ExtractStats run_extract(const PipelineConfig& cfg, const fs::path& manifest_path, const fs::path& out_dir,
                         const Logger& log) {
  cfg.validate();
  const DatasetManifest manifest = load_manifest(manifest_path);
  FeatureStore store;
  store.dir = out_dir;
  store.entries = entries_from_manifest(manifest);
  fs::create_directories(out_dir);
  const ExtractionParams params = cfg.extraction();

  std::vector<std::size_t> skipped(store.entries.size(), 0);
  parallel_for(store.entries.size(), [&](std::size_t i) {
    StoreEntry& e = store.entries[i];
    GrayImage img = load_image(manifest.resolve(manifest.entries[i]));
    if (cfg.binarize) img = to_gray(binarize_otsu(img));
    const FeatureBundle fb = extract_features(img, params, static_cast<std::uint32_t>(i));
    e.count = static_cast<std::size_t>(fb.descriptors.rows());
    e.dim = 128;
    skipped[i] = fb.detected - fb.keypoints.size();
    write_ldsc(store.descriptors_path(e), fb.descriptors);
    write_file_atomic(store.keypoints_path(e), format_keypoint_csv(fb.keypoints));
    PatchBlock block;
    block.bytes_per_pixel = cfg.binarize ? 1 : 4;
    block.pixels.reserve(fb.patches.size() * kPatchPixels);
    for (const auto& p : fb.patches) block.pixels.insert(block.pixels.end(), p.pixels.begin(), p.pixels.end());
    write_file_atomic(store.patches_path(e), encode_sptc(block));
  });
  write_store_index(store, cfg);

  ExtractStats stats;
  stats.images = store.entries.size();
  for (std::size_t i = 0; i < store.entries.size(); ++i) {
    stats.keypoints += store.entries[i].count;
    stats.skipped += skipped[i];
    if (store.entries[i].count == 0 && log) log(LogLevel::Warning, store.entries[i].id + ": no keypoints detected");
  }
  info(log, "extracted " + std::to_string(stats.keypoints) + " descriptors from " + std::to_string(stats.images) +
                " images");
  return stats;
}

void run_import_features(const PipelineConfig& cfg, const fs::path& manifest_path, const fs::path& src_dir,
                         const fs::path& out_dir, const fs::path* reference_store, const Logger& log) {
  cfg.validate();
  const DatasetManifest manifest = load_manifest(manifest_path);
  FeatureStore store;
  store.dir = out_dir;
  store.entries = entries_from_manifest(manifest);
  std::map<std::string, std::size_t> reference_counts;
  if (reference_store) {
    const FeatureStore ref = read_store(*reference_store);
    for (const auto& e : ref.entries) reference_counts[e.id] = e.count;
  }
  fs::create_directories(out_dir);
  std::size_t dim = 0;
  for (auto& e : store.entries) {
    const fs::path src = src_dir / (e.stem + ".ldsc");
    const std::string bytes = read_file(src);
    const Matrix m = decode_ldsc(bytes, src.string());
    e.count = static_cast<std::size_t>(m.rows());
    e.dim = static_cast<std::size_t>(m.cols());
    if (e.count > 0) {
      if (dim == 0) dim = e.dim;
      if (e.dim != dim) {
        fail(ErrorCode::Dimension, src.string() + ": dimension " + std::to_string(e.dim) +
                                       " differs from the other imported files (" + std::to_string(dim) + ")");
      }
    }
    if (reference_store) {
      const auto it = reference_counts.find(e.id);
      if (it == reference_counts.end()) fail(ErrorCode::InvalidArgument, e.id + ": not in the reference store");
      if (it->second != e.count) {
        fail(ErrorCode::Dimension, src.string() + ": " + std::to_string(e.count) + " rows but the reference store has " +
                                       std::to_string(it->second) + " keypoints");
      }
    }
    write_file_atomic(store.descriptors_path(e), bytes);
  }
  write_store_index(store, cfg);
  info(log, "imported " + std::to_string(store.entries.size()) + " descriptor files of dimension " +
                std::to_string(dim));
}

std::string encode_surrogate_codebook(const SurrogateCodebook& cb) {
  ByteWriter w;
  w.magic("SCBK");
  w.u16(1);
  w.u64(cb.config_hash);
  write_whitening(w, cb.pca);
  write_codebook(w, cb.codebook);
  return w.take();
}

SurrogateCodebook decode_surrogate_codebook(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  r.expect_magic("SCBK");
  r.expect_version(1);
  SurrogateCodebook cb;
  cb.config_hash = r.u64();
  cb.pca = read_whitening(r);
  cb.codebook = read_codebook(r);
  r.expect_end();
  if (cb.pca.out_dim() != cb.codebook.dim()) fail(ErrorCode::Format, source + ": PCA and codebook dimensions differ");
  return cb;
}

ClusterStats run_cluster(const PipelineConfig& cfg, const fs::path& store_dir, const fs::path& codebook_path,
                         const fs::path* surrogate_dir, const Logger& log) {
  cfg.validate();
  const FeatureStore store = read_store(store_dir);
  check_store_hash(store, cfg, log);
  const auto train = train_entries(store);
  std::vector<Matrix> sets(train.size());
  parallel_for(train.size(), [&](std::size_t i) { sets[i] = store.load(*train[i]); });
  Eigen::Index total = 0;
  const Eigen::Index dim = static_cast<Eigen::Index>(store.dim());
  for (const auto& s : sets) {
    if (s.rows() > 0) require_dim(static_cast<std::size_t>(s.cols()), static_cast<std::size_t>(dim), "cluster input");
    total += s.rows();
  }
  if (cfg.pca_dim_local > static_cast<std::size_t>(dim)) {
    fail(ErrorCode::Dimension, "pca_dim_local " + std::to_string(cfg.pca_dim_local) +
                                   " exceeds the descriptor dimension " + std::to_string(dim));
  }
  Matrix pool(total, dim);
  Eigen::Index at = 0;
  for (const auto& s : sets) {
    if (s.rows() == 0) continue;
    pool.middleRows(at, s.rows()) = s;
    at += s.rows();
  }
  const KMeansParams km = cfg.clustering();
  const auto rows = sample_without_replacement(static_cast<std::size_t>(total),
                                               std::min<std::size_t>(km.sample_size, static_cast<std::size_t>(total)),
                                               km.seed);
  const Matrix sample = gather_rows(pool, rows);
  SurrogateCodebook cb;
  cb.config_hash = cfg.stage_hash(Stage::Cluster);
  cb.pca = fit_pca_whitening(sample, cfg.pca_dim_local);
  cb.codebook = minibatch_kmeans(apply_whitening_rows(cb.pca, sample), km);
  if (fs::path parent = codebook_path.parent_path(); !parent.empty()) fs::create_directories(parent);
  write_file_atomic(codebook_path, encode_surrogate_codebook(cb));
  info(log, "codebook with " + std::to_string(cb.codebook.k()) + " centers fit on " + std::to_string(rows.size()) +
                " descriptors");
  ClusterStats stats;
  stats.descriptors = static_cast<std::size_t>(total);
  if (surrogate_dir) stats = run_export_surrogates(cfg, store_dir, codebook_path, *surrogate_dir, log);
  return stats;
}

ClusterStats run_export_surrogates(const PipelineConfig& cfg, const fs::path& store_dir, const fs::path& codebook_path,
                                   const fs::path& out_dir, const Logger& log) {
  cfg.validate();
  const FeatureStore store = read_store(store_dir);
  check_store_hash(store, cfg, log);
  const SurrogateCodebook cb = decode_surrogate_codebook(read_file(codebook_path), codebook_path.string());
  check_hash(log, "codebook " + codebook_path.string(), cb.config_hash, cfg.stage_hash(Stage::Cluster));
  require_dim(store.dim(), cb.pca.in_dim(), "surrogate export descriptors");
  const auto train = train_entries(store);

  std::vector<float> pixels;
  std::vector<PatchMeta> meta;
  std::vector<Assignment> assignments;
  std::uint8_t bpp = 0;
  for (const StoreEntry* e : train) {
    if (!fs::exists(store.patches_path(*e))) {
      fail(ErrorCode::InvalidArgument, store.patches_path(*e).string() + ": store has no patches (imported features?)");
    }
    const Matrix d = store.load(*e);
    const PatchBlock block = decode_sptc(read_file(store.patches_path(*e)), store.patches_path(*e).string());
    if (block.count() != static_cast<std::size_t>(d.rows()) || block.side != kPatchSide) {
      fail(ErrorCode::Format, store.patches_path(*e).string() + ": " + std::to_string(block.count()) +
                                  " patches for " + std::to_string(d.rows()) + " descriptors");
    }
    if (bpp != 0 && block.bytes_per_pixel != bpp) fail(ErrorCode::Format, "patch files mix pixel formats");
    bpp = block.bytes_per_pixel;
    pixels.insert(pixels.end(), block.pixels.begin(), block.pixels.end());
    for (Eigen::Index r = 0; r < d.rows(); ++r) meta.push_back({e->id, static_cast<std::uint32_t>(r)});
    if (d.rows() > 0) {
      const auto a = assign_all(apply_whitening_rows(cb.pca, d), cb.codebook);
      assignments.insert(assignments.end(), a.begin(), a.end());
    }
  }
  const auto mask = ratio_filter(assignments, cfg.kmeans.ratio_max);
  const SurrogateDataset ds =
      build_surrogate_dataset(pixels, meta, assignments, mask, cb.codebook.k(), bpp == 0 ? 1 : bpp);
  export_surrogate_dataset(ds, out_dir);
  ClusterStats stats{assignments.size(), ds.size(), ds.populated_classes()};
  if (!ds.empty_classes.empty() && log) {
    log(LogLevel::Warning, std::to_string(ds.empty_classes.size()) + " of " + std::to_string(cb.codebook.k()) +
                               " surrogate classes are empty after ratio filtering");
  }
  info(log, "surrogate dataset: " + std::to_string(stats.kept) + " of " + std::to_string(stats.descriptors) +
                " patches kept");
  return stats;
}

void run_fit_encoder(const PipelineConfig& cfg, const fs::path& store_dir, const fs::path& model_path,
                     const Logger& log) {
  cfg.validate();
  const FeatureStore store = read_store(store_dir);
  check_store_hash(store, cfg, log);
  const auto train = train_entries(store);
  std::vector<Matrix> sets(train.size());
  parallel_for(train.size(), [&](std::size_t i) { sets[i] = store.load(*train[i]); });
  const std::size_t dim = store.dim();
  for (auto& s : sets) {
    if (s.rows() == 0) s.resize(0, static_cast<Eigen::Index>(dim));
  }
  EncoderModel model = fit_encoder(cfg.encoder, sets, cfg.mvlad());
  model.config_hash = cfg.stage_hash(Stage::Encode);
  if (fs::path parent = model_path.parent_path(); !parent.empty()) fs::create_directories(parent);
  write_file_atomic(model_path, encode_encoder_model(model));
  info(log, "encoder fit on " + std::to_string(train.size()) + " images; output dimension " +
                std::to_string(model.output_dim()));
}

EncoderModel load_encoder(const fs::path& path) { return decode_encoder_model(read_file(path), path.string()); }

void run_encode(const PipelineConfig& cfg, const fs::path& store_dir, const fs::path& model_path,
                const fs::path& out_path, const Logger& log) {
  const FeatureStore store = read_store(store_dir);
  check_store_hash(store, cfg, log);
  const EncoderModel model = load_encoder(model_path);
  check_hash(log, "encoder model " + model_path.string(), model.config_hash, cfg.stage_hash(Stage::Encode));
  const std::size_t dim = store.dim();
  if (dim != model.input_dim) {
    fail(ErrorCode::Dimension, "feature dimension " + std::to_string(dim) + " does not match the model input dimension " +
                                   std::to_string(model.input_dim));
  }
  GlobalDescriptorSet out;
  out.values.resize(static_cast<Eigen::Index>(store.entries.size()), static_cast<Eigen::Index>(model.output_dim()));
  std::vector<std::uint8_t> zero(store.entries.size(), 0);
  parallel_for(store.entries.size(), [&](std::size_t i) {
    Matrix d = store.load(store.entries[i]);
    if (d.rows() == 0) d.resize(0, static_cast<Eigen::Index>(dim));
    const Encoded e = model.encode(d);
    out.values.row(static_cast<Eigen::Index>(i)) = e.values.transpose();
    zero[i] = e.zero ? 1 : 0;
  });
  for (std::size_t i = 0; i < store.entries.size(); ++i) {
    out.ids.push_back(store.entries[i].id);
    if (zero[i] && log) log(LogLevel::Warning, store.entries[i].id + ": empty encoding (no usable descriptors)");
  }
  if (fs::path parent = out_path.parent_path(); !parent.empty()) fs::create_directories(parent);
  write_gdsc(out_path, out);
  write_file_atomic(fs::path(out_path.string() + ".cfg"), config_sidecar(cfg, Stage::Encode));
  info(log, "encoded " + std::to_string(store.entries.size()) + " images");
}

namespace {

struct SplitEncodings {
  Matrix train, test;
  std::vector<std::string> train_labels, test_labels, train_ids, test_ids;
};

SplitEncodings split_encodings(const PipelineConfig& cfg, const fs::path& gdsc_path, const fs::path& manifest_path,
                               const Logger& log) {
  const GlobalDescriptorSet set = read_gdsc(gdsc_path);
  if (const auto h = read_sidecar_hash(fs::path(gdsc_path.string() + ".cfg"))) {
    check_hash(log, "encodings " + gdsc_path.string(), *h, cfg.stage_hash(Stage::Encode));
  }
  const DatasetManifest manifest = load_manifest(manifest_path);
  std::map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    if (!row_of.emplace(set.ids[i], static_cast<Eigen::Index>(i)).second) {
      fail(ErrorCode::Format, gdsc_path.string() + ": duplicate id '" + set.ids[i] + "'");
    }
  }
  SplitEncodings s;
  std::vector<Eigen::Index> train_rows, test_rows;
  for (const auto& e : manifest.entries) {
    const auto it = row_of.find(e.path);
    if (it == row_of.end()) fail(ErrorCode::InvalidArgument, gdsc_path.string() + ": no encoding for '" + e.path + "'");
    if (e.split == Split::Train) {
      train_rows.push_back(it->second);
      s.train_labels.push_back(e.label);
      s.train_ids.push_back(e.path);
    } else {
      test_rows.push_back(it->second);
      s.test_labels.push_back(e.label);
      s.test_ids.push_back(e.path);
    }
  }
  s.train = set.values(train_rows, Eigen::all);
  s.test = set.values(test_rows, Eigen::all);
  return s;
}

}  // namespace

std::string RetrievalOutcome::json() const {
  return report_json(report, config_hash, esvm ? "esvm" : "cosine", esvm ? svm_c : 0.0);
}

std::string RetrievalOutcome::table() const { return report_table(report, esvm ? "E-SVM-FE" : "cosine"); }

RetrievalOutcome run_evaluate(const PipelineConfig& cfg, const fs::path& gdsc_path, const fs::path& manifest,
                              bool esvm, const Logger& log) {
  cfg.validate();
  const SplitEncodings s = split_encodings(cfg, gdsc_path, manifest, log);
  if (s.test.rows() < 2) fail(ErrorCode::InvalidArgument, "evaluation needs at least two test-split images");
  RetrievalOutcome out;
  out.esvm = esvm;
  out.config_hash = cfg.stage_hash(esvm ? Stage::Svm : Stage::Encode);
  Matrix queries = s.test;
  if (esvm) {
    if (s.train.rows() == 0) fail(ErrorCode::InvalidArgument, "E-SVM needs train-split encodings as negatives");
    const std::set<std::string> train_writers(s.train_labels.begin(), s.train_labels.end());
    for (const auto& l : s.test_labels) {
      if (train_writers.count(l)) {
        fail(ErrorCode::InvalidArgument, "label '" + l + "' appears in both splits; E-SVM negatives must be disjoint");
      }
    }
    if (cfg.svm_c > 0.0) {
      out.svm_c = cfg.svm_c;
    } else {
      const CSelection sel = select_C(s.train, s.train_labels, cfg.svm_selection(SelectionMode::Retrieval));
      out.svm_c = sel.C;
      info(log, "selected C = " + std::to_string(sel.C));
    }
    SvmOptions opts;
    opts.tolerance = cfg.svm_tolerance;
    opts.max_iterations = cfg.svm_max_iterations;
    queries = esvm_encode_all(s.test, s.train, out.svm_c, opts);
  }
  out.report = leave_one_out_eval(queries, s.test_labels, s.test_ids);
  if (out.report.no_relevant > 0 && log) {
    log(LogLevel::Warning, std::to_string(out.report.no_relevant) + " queries have no other image of their label (AP = 0)");
  }
  return out;
}

std::string ClassificationOutcome::json() const {
  nlohmann::ordered_json j;
  j["config_hash"] = hash_hex(config_hash);
  j["method"] = "svm";
  j["svm_c"] = svm_c;
  j["accuracy"] = accuracy;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    per.push_back({{"id", ids[i]}, {"label", truth[i]}, {"predicted", predicted[i]}});
  }
  j["per_image"] = std::move(per);
  return j.dump(2) + "\n";
}

std::string ClassificationOutcome::table() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-20s %7s\n%-20s %7.1f\n", "Method", "Top-1", "SVM", 100.0 * accuracy);
  return buf;
}

ClassificationOutcome run_classify(const PipelineConfig& cfg, const fs::path& gdsc_path, const fs::path& manifest,
                                   const Logger& log) {
  cfg.validate();
  const SplitEncodings s = split_encodings(cfg, gdsc_path, manifest, log);
  if (s.test.rows() == 0) fail(ErrorCode::InvalidArgument, "classification needs test-split images");
  ClassificationOutcome out;
  out.config_hash = cfg.stage_hash(Stage::Svm);
  SvmOptions opts;
  opts.tolerance = cfg.svm_tolerance;
  opts.max_iterations = cfg.svm_max_iterations;
  if (cfg.svm_c > 0.0) {
    out.svm_c = cfg.svm_c;
  } else {
    out.svm_c = select_C(s.train, s.train_labels, cfg.svm_selection(SelectionMode::Classification)).C;
    info(log, "selected C = " + std::to_string(out.svm_c));
  }
  const MulticlassSvm model = train_multiclass_svm(s.train, s.train_labels, out.svm_c, opts);
  const auto pred = model.predict_all(s.test);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out.ids.push_back(s.test_ids[i]);
    out.truth.push_back(s.test_labels[i]);
    out.predicted.push_back(model.classes[pred[i]]);
    if (out.predicted.back() == out.truth.back()) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
  return out;
}

}  // namespace scriptoria
