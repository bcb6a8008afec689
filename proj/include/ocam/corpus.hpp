#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ocam/metric.hpp"

namespace ocam {

// Feature corpus. Labels are dense 0..J-1; class_names records the
// original label string for each dense id. Ids are stable across
// splitting so retrieval results can be traced back to source rows.
struct Dataset {
  std::vector<std::string> class_names;
  std::vector<std::int32_t> labels;
  std::vector<Vec> features;
  std::vector<std::int64_t> ids;

  std::size_t size() const { return features.size(); }
  std::size_t dim() const { return features.empty() ? 0 : features[0].size(); }
  std::size_t num_classes() const { return class_names.size(); }
  std::vector<std::size_t> class_counts() const;
};

// Structural checks: parallel array lengths, dense labels, unique ids,
// consistent feature dims. Throws UsageError on violation.
void validate(const Dataset& ds);

// CSV with header "label,f0,f1,...". Labels may be arbitrary strings;
// they are densified in first-appearance order. Ids are assigned by data
// row order starting at 0. Parse failures carry the 1-based line number.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

struct SynthSpec {
  std::size_t classes = 8;
  std::size_t per_class = 120;
  std::size_t dim = 32;
  double spacing = 6.0;  // center offset as a multiple of sigma
  double sigma = 1.0;
};

// Isotropic Gaussian clusters. Class j is centered at
// spacing * sigma * (+/- e_{j mod dim}): axes first, then the same axes
// negated, which caps classes at 2 * dim before directions would repeat.
Dataset synth_clusters(const SynthSpec& spec, std::uint64_t seed);

struct SplitSpec {
  double train_fraction = 0.85;
  bool stratified = true;
  std::uint64_t seed = 0;
};

struct SplitResult {
  Dataset train;
  Dataset test;
};

// Disjoint, exhaustive partition preserving ids and the shared class
// table. Stratified mode splits within each class, floor of the fraction
// on the train side; it requires every class to have >= 2 samples.
SplitResult train_test_split(const Dataset& ds, const SplitSpec& spec);

}  // namespace ocam
