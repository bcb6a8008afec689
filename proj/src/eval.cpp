#include "ocam/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <limits>
#include <set>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "ocam/error.hpp"

namespace ocam {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string iso8601_utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::ordered_json finite_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

const char* to_string(MapMode m) {
  return m == MapMode::standard ? "standard" : "as_written";
}

MapMode map_mode_from_string(std::string_view s) {
  if (s == "standard") return MapMode::standard;
  if (s == "as_written") return MapMode::as_written;
  throw UsageError("unknown map mode: '" + std::string(s) + "'");
}

double precision_at_z(const std::vector<int>& relevance) {
  if (relevance.empty()) throw UsageError("precision_at_z: empty relevance");
  double hits = 0.0;
  for (const int t : relevance) hits += t ? 1.0 : 0.0;
  return hits / static_cast<double>(relevance.size());
}

double average_precision(const std::vector<int>& relevance, MapMode mode) {
  if (relevance.empty())
    throw UsageError("average_precision: empty relevance");
  if (mode == MapMode::as_written) {
    double sum = 0.0;
    for (std::size_t z = 0; z < relevance.size(); ++z)
      if (relevance[z]) sum += 1.0 / static_cast<double>(z + 1);
    return sum / static_cast<double>(relevance.size());
  }
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t z = 0; z < relevance.size(); ++z) {
    if (!relevance[z]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(z + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

void validate(const EvalOptions& opts) {
  if (opts.zs.empty()) throw UsageError("eval: no Z values given");
  for (const std::size_t z : opts.zs)
    if (z == 0) throw UsageError("eval: Z must be >= 1");
  if (std::set<std::size_t>(opts.zs.begin(), opts.zs.end()).size() !=
      opts.zs.size())
    throw UsageError("eval: duplicate Z values");
  if (opts.spaces.empty()) throw UsageError("eval: no spaces given");
  if (std::set<Space>(opts.spaces.begin(), opts.spaces.end()).size() !=
      opts.spaces.size())
    throw UsageError("eval: duplicate spaces");
  if (opts.threads == 0) throw UsageError("eval: threads must be >= 1");
}

EvalReport evaluate(const Dataset& test, const ModelParams& model,
                    const EvalOptions& opts) {
  validate(opts);
  validate(test);
  const auto t0 = std::chrono::steady_clock::now();

  EvalReport report;
  report.m = test.size();
  report.feature_dim = test.dim();
  report.embedding_dim = model.output_dim;
  report.class_names = test.class_names;
  report.class_counts = test.class_counts();
  for (std::size_t c = 0; c < report.class_counts.size(); ++c) {
    if (report.class_counts[c] >= 2) {
      report.included_classes.push_back(c);
    } else if (report.class_counts[c] == 1) {
      report.excluded_classes.push_back(c);
      report.warnings.push_back("class '" + report.class_names[c] +
                               "' has a single sample; excluded from macro "
                               "averages");
    }
  }
  if (report.included_classes.empty())
    report.warnings.push_back(
        "no class has >= 2 samples; macro averages are empty");

  std::vector<Vec> embeddings;
  embeddings.reserve(test.size());
  for (const Vec& x : test.features)
    embeddings.push_back(forward(model, x, false, nullptr));
  const RetrievalIndex ix =
      build_index(embeddings, test.labels, test.ids);

  // Queries in class-then-row order; this is also the aggregation order.
  std::vector<std::size_t> queries;
  for (const std::size_t c : report.included_classes)
    for (std::size_t r = 0; r < test.size(); ++r)
      if (static_cast<std::size_t>(test.labels[r]) == c) queries.push_back(r);

  std::size_t max_z = 0;
  for (const std::size_t z : opts.zs) max_z = std::max(max_z, z);

  std::unordered_map<std::int64_t, std::size_t> pos_by_id;
  pos_by_id.reserve(ix.size());
  for (std::size_t i = 0; i < ix.size(); ++i) pos_by_id.emplace(ix.ids[i], i);

  struct QueryMetrics {
    double p = 0.0, ap_std = 0.0, ap_aw = 0.0;
    bool short_list = false;
  };
  const std::size_t n_spaces = opts.spaces.size();
  const std::size_t n_zs = opts.zs.size();
  std::vector<QueryMetrics> slots(queries.size() * n_spaces * n_zs);

  auto run_query = [&](std::size_t qi) {
    const std::size_t row = queries[qi];
    for (std::size_t si = 0; si < n_spaces; ++si) {
      const RetrievalResult res =
          query_topz(ix, embeddings[row], max_z, opts.spaces[si],
                     test.ids[row]);
      std::vector<int> relevance(res.items.size());
      for (std::size_t k = 0; k < res.items.size(); ++k) {
        // ids equal row positions only for freshly loaded corpora, so
        // resolve by id lookup.
        const std::size_t pos = pos_by_id.at(res.items[k].id);
        relevance[k] = ix.labels[pos] == test.labels[row] ? 1 : 0;
      }
      for (std::size_t zi = 0; zi < n_zs; ++zi) {
        const std::size_t len = std::min(opts.zs[zi], relevance.size());
        const std::vector<int> prefix(relevance.begin(),
                                      relevance.begin() + len);
        QueryMetrics& qm = slots[(qi * n_spaces + si) * n_zs + zi];
        qm.p = precision_at_z(prefix);
        qm.ap_std = average_precision(prefix, MapMode::standard);
        qm.ap_aw = average_precision(prefix, MapMode::as_written);
        qm.short_list = len < opts.zs[zi];
      }
    }
  };

  const std::size_t workers = std::min(opts.threads, queries.size());
  if (workers <= 1) {
    for (std::size_t qi = 0; qi < queries.size(); ++qi) run_query(qi);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t qi = w; qi < queries.size(); qi += workers)
          run_query(qi);
      });
    for (std::thread& th : pool) th.join();
  }

  const std::size_t n_classes = report.class_names.size();
  for (std::size_t si = 0; si < n_spaces; ++si) {
    for (std::size_t zi = 0; zi < n_zs; ++zi) {
      EvalCell cell;
      cell.space = opts.spaces[si];
      cell.z = opts.zs[zi];
      cell.precision_per_class.assign(n_classes, kNaN);
      cell.ap_standard_per_class.assign(n_classes, kNaN);
      cell.ap_as_written_per_class.assign(n_classes, kNaN);

      std::vector<double> p_sum(n_classes, 0.0), s_sum(n_classes, 0.0),
          a_sum(n_classes, 0.0);
      std::vector<std::size_t> q_count(n_classes, 0);
      for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const QueryMetrics& qm = slots[(qi * n_spaces + si) * n_zs + zi];
        const auto c = static_cast<std::size_t>(test.labels[queries[qi]]);
        p_sum[c] += qm.p;
        s_sum[c] += qm.ap_std;
        a_sum[c] += qm.ap_aw;
        ++q_count[c];
        cell.short_lists = cell.short_lists || qm.short_list;
      }
      double p_macro = 0.0, s_macro = 0.0, a_macro = 0.0;
      for (const std::size_t c : report.included_classes) {
        const auto nq = static_cast<double>(q_count[c]);
        cell.precision_per_class[c] = p_sum[c] / nq;
        cell.ap_standard_per_class[c] = s_sum[c] / nq;
        cell.ap_as_written_per_class[c] = a_sum[c] / nq;
        p_macro += cell.precision_per_class[c];
        s_macro += cell.ap_standard_per_class[c];
        a_macro += cell.ap_as_written_per_class[c];
      }
      const auto nc = static_cast<double>(report.included_classes.size());
      cell.precision_macro = nc > 0 ? p_macro / nc : kNaN;
      cell.map_standard = nc > 0 ? s_macro / nc : kNaN;
      cell.map_as_written = nc > 0 ? a_macro / nc : kNaN;
      report.cells.push_back(std::move(cell));
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

std::string report_to_json(const EvalReport& report,
                           const std::map<std::string, std::string>& config,
                           std::uint64_t config_hash, std::uint64_t seed,
                           MapMode default_mode) {
  using json = nlohmann::ordered_json;
  json j;
  // Volatile block: the only part allowed to differ between reruns of an
  // identical configuration.
  j["meta"] = {{"generator", "ocam"},
               {"version", "0.1.0"},
               {"timestamp", iso8601_utc_now()},
               {"wall_seconds", report.wall_seconds}};
  j["seed"] = seed;
  json cfg = json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof hash_buf, "0x%016llx",
                static_cast<unsigned long long>(config_hash));
  cfg["hash"] = hash_buf;
  j["config"] = std::move(cfg);
  j["protocol"] = {{"leave_one_query_out", true},
                   {"map_mode_default", to_string(default_mode)},
                   {"short_list_normalization", "returned_count"}};

  json counts = json::object();
  std::size_t present = 0;
  for (std::size_t c = 0; c < report.class_counts.size(); ++c)
    if (report.class_counts[c] > 0) {
      ++present;
      counts[report.class_names[c]] = report.class_counts[c];
    }
  json excluded = json::array();
  for (const std::size_t c : report.excluded_classes)
    excluded.push_back(report.class_names[c]);
  j["dataset"] = {{"M", report.m},
                  {"J", present},
                  {"feature_dim", report.feature_dim},
                  {"embedding_dim", report.embedding_dim},
                  {"class_counts", std::move(counts)},
                  {"excluded_classes", std::move(excluded)}};
  j["warnings"] = report.warnings;

  json results = json::object();
  for (const EvalCell& cell : report.cells) {
    auto per_class = [&](const std::vector<double>& values) {
      json out = json::object();
      for (const std::size_t c : report.included_classes)
        out[report.class_names[c]] = finite_or_null(values[c]);
      return out;
    };
    json entry = {
        {"precision",
         {{"macro", finite_or_null(cell.precision_macro)},
          {"per_class", per_class(cell.precision_per_class)}}},
        {"map_standard",
         {{"macro", finite_or_null(cell.map_standard)},
          {"per_class", per_class(cell.ap_standard_per_class)}}},
        {"map_as_written",
         {{"macro", finite_or_null(cell.map_as_written)},
          {"per_class", per_class(cell.ap_as_written_per_class)}}},
        {"short_lists", cell.short_lists}};
    results[to_string(cell.space)][std::to_string(cell.z)] = std::move(entry);
  }
  j["results"] = std::move(results);
  return j.dump(2) + "\n";
}

}  // namespace ocam
