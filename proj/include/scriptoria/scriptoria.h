/* Writer identification and retrieval toolkit: C interface.
 *
 * Every function returns an sc_status. On failure the thread-local message
 * from sc_last_error() describes the problem. Strings returned through char**
 * are owned by the caller and released with sc_string_free(). */
#ifndef SCRIPTORIA_H
#define SCRIPTORIA_H

#include <stddef.h>
#include <stdint.h>

#if defined(SCRIPTORIA_BUILDING_LIBRARY)
#define SC_API __attribute__((visibility("default")))
#else
#define SC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sc_status {
  SC_OK = 0,
  SC_ERR_INVALID_ARGUMENT = 1,
  SC_ERR_IO = 2,
  SC_ERR_FORMAT = 3,
  SC_ERR_DIMENSION = 4,
  SC_ERR_STATE = 5,
  SC_ERR_DEGENERATE = 6,
  SC_ERR_INTERNAL = 99
} sc_status;

typedef enum sc_stage { SC_STAGE_EXTRACT = 0, SC_STAGE_CLUSTER = 1, SC_STAGE_ENCODE = 2, SC_STAGE_SVM = 3 } sc_stage;

typedef enum sc_log_level { SC_LOG_INFO = 0, SC_LOG_WARNING = 1 } sc_log_level;

typedef void (*sc_log_fn)(sc_log_level level, const char* message, void* user);

SC_API const char* sc_version(void);
SC_API const char* sc_last_error(void);
SC_API void sc_string_free(char* s);
/* Receives warnings (e.g. config-hash mismatches) and progress notes. NULL silences. */
SC_API void sc_set_log_callback(sc_log_fn fn, void* user);

/* ---- configuration ----------------------------------------------------- */
typedef struct sc_config sc_config;

SC_API sc_status sc_config_create(sc_config** out);
SC_API void sc_config_destroy(sc_config* cfg);
/* Applies a `key = value` file on top of the current values. */
SC_API sc_status sc_config_load(sc_config* cfg, const char* path);
SC_API sc_status sc_config_set(sc_config* cfg, const char* key, const char* value);
SC_API sc_status sc_config_validate(const sc_config* cfg);
SC_API sc_status sc_config_hash(const sc_config* cfg, sc_stage stage, uint64_t* out);
SC_API sc_status sc_config_text(const sc_config* cfg, char** out);

/* ---- pipeline stages --------------------------------------------------- */
typedef struct sc_extract_stats {
  size_t images;
  size_t keypoints;  /* descriptors written over all images */
  size_t skipped;    /* detected keypoints dropped at the border */
} sc_extract_stats;

/* Detects keypoints on every manifest image and writes a feature store:
 * <out_dir>/index.csv plus per image <stem>.ldsc, <stem>.kp.csv, <stem>.sptc. */
SC_API sc_status sc_extract(const sc_config* cfg, const char* manifest_path, const char* out_dir,
                            sc_extract_stats* stats);

/* Copies externally computed LDSC files (<src_dir>/<stem>.ldsc for each
 * manifest entry) into a new store. When `reference_store` is given, row
 * counts must match its keypoint counts. */
SC_API sc_status sc_import_features(const sc_config* cfg, const char* manifest_path, const char* src_dir,
                                    const char* out_dir, const char* reference_store);

typedef struct sc_cluster_stats {
  size_t descriptors;   /* training descriptors assigned */
  size_t kept;          /* surviving the ratio filter */
  size_t populated;     /* non-empty surrogate classes */
} sc_cluster_stats;

/* PCA-whitens the training descriptors, fits the surrogate-class codebook and
 * writes it to `codebook_path`. Exports the surrogate dataset when
 * `surrogate_dir` is non-NULL. */
SC_API sc_status sc_cluster(const sc_config* cfg, const char* store_dir, const char* codebook_path,
                            const char* surrogate_dir, sc_cluster_stats* stats);
SC_API sc_status sc_export_surrogates(const sc_config* cfg, const char* store_dir, const char* codebook_path,
                                      const char* out_dir, sc_cluster_stats* stats);

SC_API sc_status sc_fit_encoder(const sc_config* cfg, const char* store_dir, const char* model_path);
/* Encodes every image of the store into one GDSC file. */
SC_API sc_status sc_encode(const sc_config* cfg, const char* store_dir, const char* model_path,
                           const char* out_path);

/* ---- encoder handle ------------------------------------------------------ */
typedef struct sc_encoder sc_encoder;

SC_API sc_status sc_encoder_load(const char* path, sc_encoder** out);
SC_API void sc_encoder_destroy(sc_encoder* enc);
SC_API size_t sc_encoder_input_dim(const sc_encoder* enc);
SC_API size_t sc_encoder_output_dim(const sc_encoder* enc);
/* `descriptors` is rows x cols row-major; `out` holds output_dim values.
 * `zero` (optional) is set to 1 when the encoding carries no signal. */
SC_API sc_status sc_encoder_encode(const sc_encoder* enc, const double* descriptors, size_t rows, size_t cols,
                                   double* out, int* zero);

/* ---- evaluation ----------------------------------------------------------- */
typedef struct sc_report sc_report;

/* Leave-one-image-out retrieval over the test-split images of the manifest.
 * With `esvm` set, test encodings are replaced by exemplar-SVM features
 * trained against the train-split encodings. */
SC_API sc_status sc_evaluate(const sc_config* cfg, const char* gdsc_path, const char* manifest_path, int esvm,
                             sc_report** out);
/* One-vs-rest linear SVM trained on the train split, scored on the test split. */
SC_API sc_status sc_classify(const sc_config* cfg, const char* gdsc_path, const char* manifest_path,
                             sc_report** out);

SC_API void sc_report_destroy(sc_report* rep);
SC_API double sc_report_map(const sc_report* rep);
SC_API double sc_report_top1(const sc_report* rep);
/* Classification accuracy; retrieval reports return top-1. */
SC_API double sc_report_accuracy(const sc_report* rep);
SC_API double sc_report_selected_c(const sc_report* rep);
SC_API sc_status sc_report_json(const sc_report* rep, char** out);
SC_API sc_status sc_report_table(const sc_report* rep, char** out);

#ifdef __cplusplus
}
#endif

#endif
