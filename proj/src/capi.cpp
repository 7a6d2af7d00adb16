#include "scriptoria/scriptoria.h"

#include "scriptoria/pipeline.hpp"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <new>
#include <variant>

using namespace scriptoria;

struct sc_config {
  PipelineConfig cfg;
};

struct sc_encoder {
  EncoderModel model;
};

struct sc_report {
  std::variant<RetrievalOutcome, ClassificationOutcome> outcome;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
sc_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

void forward_log(LogLevel level, const std::string& msg) {
  std::lock_guard lock(g_log_mutex);
  if (g_log_fn) g_log_fn(level == LogLevel::Warning ? SC_LOG_WARNING : SC_LOG_INFO, msg.c_str(), g_log_user);
}

const Logger kLogger = forward_log;

sc_status to_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return SC_ERR_INVALID_ARGUMENT;
    case ErrorCode::Io: return SC_ERR_IO;
    case ErrorCode::Format: return SC_ERR_FORMAT;
    case ErrorCode::Dimension: return SC_ERR_DIMENSION;
    case ErrorCode::State: return SC_ERR_STATE;
    case ErrorCode::Degenerate: return SC_ERR_DEGENERATE;
  }
  return SC_ERR_INTERNAL;
}

template <typename Fn>
sc_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SC_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return SC_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SC_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SC_ERR_INTERNAL;
  }
}

void require_ptr(const void* p, const char* name) {
  if (!p) fail(ErrorCode::InvalidArgument, std::string(name) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* sc_version(void) { return "0.1.0"; }

const char* sc_last_error(void) { return g_last_error.c_str(); }

void sc_string_free(char* s) { std::free(s); }

void sc_set_log_callback(sc_log_fn fn, void* user) {
  std::lock_guard lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

sc_status sc_config_create(sc_config** out) {
  return guarded([&] {
    require_ptr(out, "out");
    *out = new sc_config();
  });
}

void sc_config_destroy(sc_config* cfg) { delete cfg; }

sc_status sc_config_load(sc_config* cfg, const char* path) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(path, "path");
    cfg->cfg = load_config(path, cfg->cfg);
  });
}

sc_status sc_config_set(sc_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(key, "key");
    require_ptr(value, "value");
    cfg->cfg.set(key, value);
  });
}

sc_status sc_config_validate(const sc_config* cfg) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    cfg->cfg.validate();
  });
}

sc_status sc_config_hash(const sc_config* cfg, sc_stage stage, uint64_t* out) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(out, "out");
    if (stage < SC_STAGE_EXTRACT || stage > SC_STAGE_SVM) fail(ErrorCode::InvalidArgument, "unknown stage");
    *out = cfg->cfg.stage_hash(static_cast<Stage>(stage));
  });
}

sc_status sc_config_text(const sc_config* cfg, char** out) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(out, "out");
    *out = dup_string(cfg->cfg.canonical_text());
  });
}

sc_status sc_extract(const sc_config* cfg, const char* manifest_path, const char* out_dir, sc_extract_stats* stats) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(manifest_path, "manifest_path");
    require_ptr(out_dir, "out_dir");
    const ExtractStats s = run_extract(cfg->cfg, manifest_path, out_dir, kLogger);
    if (stats) *stats = {s.images, s.keypoints, s.skipped};
  });
}

sc_status sc_import_features(const sc_config* cfg, const char* manifest_path, const char* src_dir, const char* out_dir,
                             const char* reference_store) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(manifest_path, "manifest_path");
    require_ptr(src_dir, "src_dir");
    require_ptr(out_dir, "out_dir");
    const std::filesystem::path ref = reference_store ? reference_store : "";
    run_import_features(cfg->cfg, manifest_path, src_dir, out_dir, reference_store ? &ref : nullptr, kLogger);
  });
}

sc_status sc_cluster(const sc_config* cfg, const char* store_dir, const char* codebook_path, const char* surrogate_dir,
                     sc_cluster_stats* stats) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(store_dir, "store_dir");
    require_ptr(codebook_path, "codebook_path");
    const std::filesystem::path sur = surrogate_dir ? surrogate_dir : "";
    const ClusterStats s = run_cluster(cfg->cfg, store_dir, codebook_path, surrogate_dir ? &sur : nullptr, kLogger);
    if (stats) *stats = {s.descriptors, s.kept, s.populated};
  });
}

sc_status sc_export_surrogates(const sc_config* cfg, const char* store_dir, const char* codebook_path,
                               const char* out_dir, sc_cluster_stats* stats) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(store_dir, "store_dir");
    require_ptr(codebook_path, "codebook_path");
    require_ptr(out_dir, "out_dir");
    const ClusterStats s = run_export_surrogates(cfg->cfg, store_dir, codebook_path, out_dir, kLogger);
    if (stats) *stats = {s.descriptors, s.kept, s.populated};
  });
}

sc_status sc_fit_encoder(const sc_config* cfg, const char* store_dir, const char* model_path) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(store_dir, "store_dir");
    require_ptr(model_path, "model_path");
    run_fit_encoder(cfg->cfg, store_dir, model_path, kLogger);
  });
}

sc_status sc_encode(const sc_config* cfg, const char* store_dir, const char* model_path, const char* out_path) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(store_dir, "store_dir");
    require_ptr(model_path, "model_path");
    require_ptr(out_path, "out_path");
    run_encode(cfg->cfg, store_dir, model_path, out_path, kLogger);
  });
}

sc_status sc_encoder_load(const char* path, sc_encoder** out) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(out, "out");
    auto enc = std::make_unique<sc_encoder>();
    enc->model = load_encoder(path);
    *out = enc.release();
  });
}

void sc_encoder_destroy(sc_encoder* enc) { delete enc; }

size_t sc_encoder_input_dim(const sc_encoder* enc) { return enc ? enc->model.input_dim : 0; }

size_t sc_encoder_output_dim(const sc_encoder* enc) { return enc ? enc->model.output_dim() : 0; }

sc_status sc_encoder_encode(const sc_encoder* enc, const double* descriptors, size_t rows, size_t cols, double* out,
                            int* zero) {
  return guarded([&] {
    require_ptr(enc, "enc");
    require_ptr(out, "out");
    if (rows > 0) require_ptr(descriptors, "descriptors");
    require_dim(cols, enc->model.input_dim, "descriptor");
    Matrix d(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (rows > 0) {
      d = Eigen::Map<const Matrix>(descriptors, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    }
    const Encoded e = enc->model.encode(d);
    std::memcpy(out, e.values.data(), sizeof(double) * static_cast<std::size_t>(e.values.size()));
    if (zero) *zero = e.zero ? 1 : 0;
  });
}

sc_status sc_evaluate(const sc_config* cfg, const char* gdsc_path, const char* manifest_path, int esvm,
                      sc_report** out) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(gdsc_path, "gdsc_path");
    require_ptr(manifest_path, "manifest_path");
    require_ptr(out, "out");
    auto rep = std::make_unique<sc_report>();
    rep->outcome = run_evaluate(cfg->cfg, gdsc_path, manifest_path, esvm != 0, kLogger);
    *out = rep.release();
  });
}

sc_status sc_classify(const sc_config* cfg, const char* gdsc_path, const char* manifest_path, sc_report** out) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(gdsc_path, "gdsc_path");
    require_ptr(manifest_path, "manifest_path");
    require_ptr(out, "out");
    auto rep = std::make_unique<sc_report>();
    rep->outcome = run_classify(cfg->cfg, gdsc_path, manifest_path, kLogger);
    *out = rep.release();
  });
}

void sc_report_destroy(sc_report* rep) { delete rep; }

double sc_report_map(const sc_report* rep) {
  if (!rep) return 0.0;
  if (const auto* r = std::get_if<RetrievalOutcome>(&rep->outcome)) return r->report.map;
  return 0.0;
}

double sc_report_top1(const sc_report* rep) {
  if (!rep) return 0.0;
  if (const auto* r = std::get_if<RetrievalOutcome>(&rep->outcome)) return r->report.top1;
  return std::get<ClassificationOutcome>(rep->outcome).accuracy;
}

double sc_report_accuracy(const sc_report* rep) { return sc_report_top1(rep); }

double sc_report_selected_c(const sc_report* rep) {
  if (!rep) return 0.0;
  return std::visit([](const auto& o) { return o.svm_c; }, rep->outcome);
}

sc_status sc_report_json(const sc_report* rep, char** out) {
  return guarded([&] {
    require_ptr(rep, "rep");
    require_ptr(out, "out");
    *out = dup_string(std::visit([](const auto& o) { return o.json(); }, rep->outcome));
  });
}

sc_status sc_report_table(const sc_report* rep, char** out) {
  return guarded([&] {
    require_ptr(rep, "rep");
    require_ptr(out, "out");
    *out = dup_string(std::visit([](const auto& o) { return o.table(); }, rep->outcome));
  });
}

}  // extern "C"
