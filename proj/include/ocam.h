/* C interface to the metric-learning retrieval engine.
 *
 * All functions return ocam_status; OCAM_OK is 0. On failure,
 * ocam_last_error() describes the problem for the calling thread.
 * Objects returned through out-parameters are owned by the caller and
 * released with the matching _free function; strings returned through
 * char** out-parameters are released with ocam_string_free.
 *
 * Configuration is passed as key=value text ('#' comments allowed), the
 * same format `ocam config --dump-defaults` prints. Unknown keys and
 * out-of-domain values are rejected before any computation.
 */
#ifndef OCAM_H
#define OCAM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ocam_status {
  OCAM_OK = 0,
  OCAM_E_USAGE = 2,  /* bad arguments, bad config, malformed files */
  OCAM_E_RUNTIME = 3 /* numeric or I/O failure while computing */
} ocam_status;

typedef struct ocam_dataset ocam_dataset;
typedef struct ocam_model ocam_model;
typedef struct ocam_index ocam_index;

const char* ocam_version(void);

/* Message for the most recent failure on this thread; empty string if
 * none. The pointer stays valid until the next failing call on the same
 * thread. */
const char* ocam_last_error(void);

void ocam_string_free(char* s);

/* ---- datasets ------------------------------------------------------ */

/* CSV with header "label,f0,f1,...". */
ocam_status ocam_dataset_load_csv(const char* path, ocam_dataset** out);
ocam_status ocam_dataset_save_csv(const ocam_dataset* ds, const char* path);

/* Gaussian clusters from the synth.* and seed config keys. */
ocam_status ocam_dataset_synth(const char* config_text, ocam_dataset** out);

/* Train/test partition from the split.* and seed config keys. */
ocam_status ocam_dataset_split(const ocam_dataset* ds,
                               const char* config_text,
                               ocam_dataset** train_out,
                               ocam_dataset** test_out);

/* JSON summary: rows, classes, dim, class names, per-class counts. */
ocam_status ocam_dataset_info(const ocam_dataset* ds, char** json_out);

ocam_status ocam_dataset_size(const ocam_dataset* ds, size_t* rows_out);
ocam_status ocam_dataset_dim(const ocam_dataset* ds, size_t* dim_out);

/* Copies one row's features into features_out[0..dim); dim must match
 * the dataset. id_out and label_out (the class name) are optional. */
ocam_status ocam_dataset_row(const ocam_dataset* ds, size_t row,
                             double* features_out, size_t dim,
                             int64_t* id_out, char** label_out);

void ocam_dataset_free(ocam_dataset* ds);

/* ---- configuration ------------------------------------------------- */

/* Full default key set as config text. */
ocam_status ocam_config_defaults(char** text_out);

/* Validates and canonicalizes: defaults filled, auto fields resolved,
 * keys sorted. Fails on unknown keys or out-of-domain values. */
ocam_status ocam_config_resolve(const char* config_text,
                                char** canonical_out);

/* ---- training ------------------------------------------------------ */

/* Trains an embedder on the dataset per the loss.*, model.*, train.* and
 * seed config keys. Deterministic: equal (dataset, config) gives a
 * bit-identical model. history_json_out (optional) receives the per-step
 * mean loss as a JSON array. */
ocam_status ocam_train(const ocam_dataset* train_ds, const char* config_text,
                       ocam_model** model_out, char** history_json_out);

/* ---- models -------------------------------------------------------- */

ocam_status ocam_model_save(const ocam_model* m, const char* path);
ocam_status ocam_model_load(const char* path, ocam_model** out);

/* JSON summary: dims, hidden widths, activation, dropout, config hash. */
ocam_status ocam_model_info(const ocam_model* m, char** json_out);

/* Embeds one feature vector of length input_dim into out[0..embedding_dim).
 * input_dim/embedding_dim must match the model exactly. */
ocam_status ocam_model_embed(const ocam_model* m, const double* features,
                             size_t input_dim, double* out,
                             size_t embedding_dim);

void ocam_model_free(ocam_model* m);

/* ---- retrieval ----------------------------------------------------- */

/* Embeds every dataset row with the model and builds the immutable
 * index (embeddings, sign hash codes, labels, ids). */
ocam_status ocam_index_build(const ocam_model* m, const ocam_dataset* ds,
                             ocam_index** out);

ocam_status ocam_index_save(const ocam_index* ix, const char* path);
ocam_status ocam_index_load(const char* path, ocam_index** out);

/* Exact top-z scan. space is "euclidean", "hamming" or "cosine". With
 * exclude_enabled nonzero, the item with id exclude_id never appears.
 * json_out receives {"space", "z", "ids", "labels", "distances"}. */
ocam_status ocam_index_query(const ocam_index* ix, const double* embedding,
                             size_t embedding_dim, size_t z,
                             const char* space, int exclude_enabled,
                             int64_t exclude_id, char** json_out);

void ocam_index_free(ocam_index* ix);

/* ---- evaluation ---------------------------------------------------- */

/* Leave-one-query-out P@Z / mAP protocol over the test dataset, per the
 * eval.* config keys. report_json_out receives the full report with the
 * resolved config and seed embedded; everything outside its "meta"
 * object is byte-stable across reruns. */
ocam_status ocam_evaluate(const ocam_model* m, const ocam_dataset* test_ds,
                          const char* config_text, char** report_json_out);

#ifdef __cplusplus
}
#endif

#endif /* OCAM_H */
