#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ocam/corpus.hpp"
#include "ocam/index.hpp"
#include "ocam/model.hpp"

namespace ocam {

// "standard" is conventional average precision truncated at Z.
// "as_written" divides each reciprocal-rank hit by Z instead of the hit
// count, which bounds the value well below 1; it is kept for comparison
// and reported alongside.
enum class MapMode { standard, as_written };

const char* to_string(MapMode m);
MapMode map_mode_from_string(std::string_view s);

// Mean of the 0/1 relevance entries (hits over list length).
double precision_at_z(const std::vector<int>& relevance);

double average_precision(const std::vector<int>& relevance, MapMode mode);

struct EvalOptions {
  std::vector<std::size_t> zs = {5, 20, 50};
  std::vector<Space> spaces = {Space::euclidean, Space::hamming};
  std::size_t threads = 1;
};

void validate(const EvalOptions& opts);

// Metrics for one (space, Z) pair. Per-class slots are NaN for classes
// not evaluated (absent or singleton); macro values are NaN when no
// class qualifies.
struct EvalCell {
  Space space = Space::euclidean;
  std::size_t z = 0;
  std::vector<double> precision_per_class;
  std::vector<double> ap_standard_per_class;
  std::vector<double> ap_as_written_per_class;
  double precision_macro = 0.0;
  double map_standard = 0.0;
  double map_as_written = 0.0;
  bool short_lists = false;  // some query saw fewer than Z candidates
};

struct EvalReport {
  std::size_t m = 0;
  std::size_t feature_dim = 0;
  std::size_t embedding_dim = 0;
  std::vector<std::string> class_names;
  std::vector<std::size_t> class_counts;
  std::vector<std::size_t> included_classes;  // >= 2 samples
  std::vector<std::size_t> excluded_classes;  // exactly 1 sample, warned
  std::vector<std::string> warnings;
  std::vector<EvalCell> cells;  // spaces outer, zs inner
  double wall_seconds = 0.0;
};

// Leave-one-query-out protocol: embeds the corpus, builds one index,
// then ranks every qualifying sample's neighbors with itself excluded.
// Classes with a single sample are skipped as queries and excluded from
// macro averages (their items still act as distractors). Worker count
// never changes the numbers: per-query results land in fixed slots and
// are aggregated in class-then-row order.
EvalReport evaluate(const Dataset& test, const ModelParams& model,
                    const EvalOptions& opts);

// Fixed-key-order JSON rendering. The "meta" object carries the volatile
// fields (timestamp, wall clock); everything outside it is byte-stable
// across reruns of the same configuration.
std::string report_to_json(const EvalReport& report,
                           const std::map<std::string, std::string>& config,
                           std::uint64_t config_hash, std::uint64_t seed,
                           MapMode default_mode);

}  // namespace ocam
