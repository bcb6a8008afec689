#include "ocam.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "ocam/config.hpp"
#include "ocam/corpus.hpp"
#include "ocam/error.hpp"
#include "ocam/eval.hpp"
#include "ocam/index.hpp"
#include "ocam/model.hpp"
#include "ocam/trainer.hpp"

using nlohmann::ordered_json;

extern "C" {

struct ocam_dataset {
  ocam::Dataset ds;
};

struct ocam_model {
  ocam::ModelParams params;
  std::uint64_t config_hash = 0;
};

struct ocam_index {
  ocam::RetrievalIndex ix;
};

}  // extern "C"

namespace {

thread_local std::string g_last_error;

void set_error(const char* what) { g_last_error = what ? what : ""; }

template <typename F>
ocam_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return OCAM_OK;
  } catch (const ocam::UsageError& e) {
    set_error(e.what());
    return OCAM_E_USAGE;
  } catch (const std::exception& e) {
    set_error(e.what());
    return OCAM_E_RUNTIME;
  } catch (...) {
    set_error("unknown error");
    return OCAM_E_RUNTIME;
  }
}

void require(bool cond, const char* what) {
  if (!cond) throw ocam::UsageError(what);
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ocam::ResolvedConfig resolve_text(const char* config_text) {
  require(config_text != nullptr, "config text is null");
  return ocam::resolve_config(ocam::parse_config_text(config_text));
}

}  // namespace

extern "C" {

const char* ocam_version(void) { return "0.1.0"; }

const char* ocam_last_error(void) { return g_last_error.c_str(); }

void ocam_string_free(char* s) { std::free(s); }

ocam_status ocam_dataset_load_csv(const char* path, ocam_dataset** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    auto handle = new ocam_dataset{ocam::load_csv(path)};
    *out = handle;
  });
}

ocam_status ocam_dataset_save_csv(const ocam_dataset* ds, const char* path) {
  return guarded([&] {
    require(ds != nullptr && path != nullptr, "null argument");
    ocam::save_csv(ds->ds, path);
  });
}

ocam_status ocam_dataset_synth(const char* config_text, ocam_dataset** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    const ocam::ResolvedConfig rc = resolve_text(config_text);
    *out = new ocam_dataset{ocam::synth_clusters(rc.synth, rc.seed)};
  });
}

ocam_status ocam_dataset_split(const ocam_dataset* ds,
                               const char* config_text,
                               ocam_dataset** train_out,
                               ocam_dataset** test_out) {
  return guarded([&] {
    require(ds != nullptr && train_out != nullptr && test_out != nullptr,
            "null argument");
    const ocam::ResolvedConfig rc = resolve_text(config_text);
    ocam::SplitResult split = ocam::train_test_split(ds->ds, rc.split);
    *train_out = new ocam_dataset{std::move(split.train)};
    *test_out = new ocam_dataset{std::move(split.test)};
  });
}

ocam_status ocam_dataset_info(const ocam_dataset* ds, char** json_out) {
  return guarded([&] {
    require(ds != nullptr && json_out != nullptr, "null argument");
    ordered_json counts = ordered_json::object();
    const std::vector<std::size_t> cc = ds->ds.class_counts();
    for (std::size_t c = 0; c < cc.size(); ++c)
      if (cc[c] > 0) counts[ds->ds.class_names[c]] = cc[c];
    const ordered_json j = {{"rows", ds->ds.size()},
                            {"classes", counts.size()},
                            {"dim", ds->ds.dim()},
                            {"class_names", ds->ds.class_names},
                            {"class_counts", counts}};
    *json_out = copy_string(j.dump(2) + "\n");
  });
}

ocam_status ocam_dataset_size(const ocam_dataset* ds, size_t* rows_out) {
  return guarded([&] {
    require(ds != nullptr && rows_out != nullptr, "null argument");
    *rows_out = ds->ds.size();
  });
}

ocam_status ocam_dataset_dim(const ocam_dataset* ds, size_t* dim_out) {
  return guarded([&] {
    require(ds != nullptr && dim_out != nullptr, "null argument");
    *dim_out = ds->ds.dim();
  });
}

ocam_status ocam_dataset_row(const ocam_dataset* ds, size_t row,
                             double* features_out, size_t dim,
                             int64_t* id_out, char** label_out) {
  return guarded([&] {
    require(ds != nullptr && features_out != nullptr, "null argument");
    require(row < ds->ds.size(), "row out of range");
    require(dim == ds->ds.dim(), "dim does not match the dataset");
    std::memcpy(features_out, ds->ds.features[row].data(),
                dim * sizeof(double));
    if (id_out) *id_out = ds->ds.ids[row];
    if (label_out)
      *label_out = copy_string(
          ds->ds.class_names[static_cast<std::size_t>(ds->ds.labels[row])]);
  });
}

void ocam_dataset_free(ocam_dataset* ds) { delete ds; }

ocam_status ocam_config_defaults(char** text_out) {
  return guarded([&] {
    require(text_out != nullptr, "null argument");
    *text_out = copy_string(ocam::dump_config(ocam::default_config()));
  });
}

ocam_status ocam_config_resolve(const char* config_text,
                                char** canonical_out) {
  return guarded([&] {
    require(canonical_out != nullptr, "null argument");
    const ocam::ResolvedConfig rc = resolve_text(config_text);
    *canonical_out = copy_string(ocam::dump_config(rc.canonical));
  });
}

ocam_status ocam_train(const ocam_dataset* train_ds, const char* config_text,
                       ocam_model** model_out, char** history_json_out) {
  return guarded([&] {
    require(train_ds != nullptr && model_out != nullptr, "null argument");
    const ocam::ResolvedConfig rc = resolve_text(config_text);
    ocam::TrainResult result = ocam::train(train_ds->ds, rc.train);
    auto* handle = new ocam_model{std::move(result.model), rc.hash};
    if (history_json_out) {
      const ordered_json h = result.history;
      try {
        *history_json_out = copy_string(h.dump() + "\n");
      } catch (...) {
        delete handle;
        throw;
      }
    }
    *model_out = handle;
  });
}

ocam_status ocam_model_save(const ocam_model* m, const char* path) {
  return guarded([&] {
    require(m != nullptr && path != nullptr, "null argument");
    ocam::save_model(m->params, m->config_hash, path);
  });
}

ocam_status ocam_model_load(const char* path, ocam_model** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    ocam::LoadedModel loaded = ocam::load_model(path);
    *out = new ocam_model{std::move(loaded.model), loaded.config_hash};
  });
}

ocam_status ocam_model_info(const ocam_model* m, char** json_out) {
  return guarded([&] {
    require(m != nullptr && json_out != nullptr, "null argument");
    ordered_json hidden = ordered_json::array();
    for (std::size_t l = 0; l + 1 < m->params.layers.size(); ++l)
      hidden.push_back(m->params.layers[l].out_dim);
    char hash_buf[32];
    std::snprintf(hash_buf, sizeof hash_buf, "0x%016llx",
                  static_cast<unsigned long long>(m->config_hash));
    const ordered_json j = {
        {"input_dim", m->params.input_dim},
        {"embedding_dim", m->params.output_dim},
        {"hidden", hidden},
        {"activation", ocam::to_string(m->params.activation)},
        {"dropout", m->params.dropout_rate},
        {"parameters", m->params.parameter_count()},
        {"config_hash", hash_buf}};
    *json_out = copy_string(j.dump(2) + "\n");
  });
}

ocam_status ocam_model_embed(const ocam_model* m, const double* features,
                             size_t input_dim, double* out,
                             size_t embedding_dim) {
  return guarded([&] {
    require(m != nullptr && features != nullptr && out != nullptr,
            "null argument");
    require(input_dim == m->params.input_dim,
            "input_dim does not match the model");
    require(embedding_dim == m->params.output_dim,
            "embedding_dim does not match the model");
    const ocam::Vec e = ocam::forward(
        m->params, std::span<const double>(features, input_dim), false,
        nullptr);
    std::memcpy(out, e.data(), e.size() * sizeof(double));
  });
}

void ocam_model_free(ocam_model* m) { delete m; }

ocam_status ocam_index_build(const ocam_model* m, const ocam_dataset* ds,
                             ocam_index** out) {
  return guarded([&] {
    require(m != nullptr && ds != nullptr && out != nullptr, "null argument");
    std::vector<ocam::Vec> embeddings;
    embeddings.reserve(ds->ds.size());
    for (const ocam::Vec& x : ds->ds.features)
      embeddings.push_back(ocam::forward(m->params, x, false, nullptr));
    *out = new ocam_index{ocam::build_index(std::move(embeddings),
                                            ds->ds.labels, ds->ds.ids)};
  });
}

ocam_status ocam_index_save(const ocam_index* ix, const char* path) {
  return guarded([&] {
    require(ix != nullptr && path != nullptr, "null argument");
    ocam::save_index(ix->ix, path);
  });
}

ocam_status ocam_index_load(const char* path, ocam_index** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new ocam_index{ocam::load_index(path)};
  });
}

ocam_status ocam_index_query(const ocam_index* ix, const double* embedding,
                             size_t embedding_dim, size_t z,
                             const char* space, int exclude_enabled,
                             int64_t exclude_id, char** json_out) {
  return guarded([&] {
    require(ix != nullptr && embedding != nullptr && space != nullptr &&
                json_out != nullptr,
            "null argument");
    std::optional<std::int64_t> exclude;
    if (exclude_enabled) exclude = exclude_id;
    const ocam::RetrievalResult res = ocam::query_topz(
        ix->ix, std::span<const double>(embedding, embedding_dim), z,
        ocam::space_from_string(space), exclude);

    std::unordered_map<std::int64_t, std::size_t> pos_by_id;
    for (std::size_t i = 0; i < ix->ix.size(); ++i)
      pos_by_id.emplace(ix->ix.ids[i], i);
    ordered_json ids = ordered_json::array();
    ordered_json labels = ordered_json::array();
    ordered_json distances = ordered_json::array();
    for (const ocam::RankedItem& item : res.items) {
      ids.push_back(item.id);
      labels.push_back(ix->ix.labels[pos_by_id.at(item.id)]);
      distances.push_back(item.distance);
    }
    const ordered_json j = {{"space", ocam::to_string(res.space)},
                            {"z", z},
                            {"ids", ids},
                            {"labels", labels},
                            {"distances", distances}};
    *json_out = copy_string(j.dump(2) + "\n");
  });
}

void ocam_index_free(ocam_index* ix) { delete ix; }

ocam_status ocam_evaluate(const ocam_model* m, const ocam_dataset* test_ds,
                          const char* config_text, char** report_json_out) {
  return guarded([&] {
    require(m != nullptr && test_ds != nullptr && report_json_out != nullptr,
            "null argument");
    const ocam::ResolvedConfig rc = resolve_text(config_text);
    const ocam::EvalReport report =
        ocam::evaluate(test_ds->ds, m->params, rc.eval);
    *report_json_out = copy_string(ocam::report_to_json(
        report, rc.canonical, rc.hash, rc.seed, rc.map_mode));
  });
}

}  // extern "C"
