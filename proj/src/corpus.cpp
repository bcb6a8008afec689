#include "ocam/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ocam/error.hpp"
#include "ocam/rng.hpp"

namespace ocam {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_feature(const std::string& s, const std::string& path,
                     std::size_t line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v))
    throw UsageError(path + ":" + std::to_string(line_no) +
                     ": non-numeric feature '" + s + "'");
  return v;
}

}  // namespace

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (const std::int32_t l : labels) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

void validate(const Dataset& ds) {
  const std::size_t k = ds.features.size();
  if (ds.labels.size() != k || ds.ids.size() != k)
    throw UsageError("dataset: parallel arrays differ in length");
  if (k == 0) throw UsageError("dataset: empty");
  const std::size_t d = ds.features[0].size();
  if (d == 0) throw UsageError("dataset: zero-dimensional features");
  for (const Vec& f : ds.features)
    if (f.size() != d) throw UsageError("dataset: ragged feature vectors");
  const auto j = static_cast<std::int32_t>(ds.class_names.size());
  if (j == 0) throw UsageError("dataset: no classes declared");
  for (const std::int32_t l : ds.labels)
    if (l < 0 || l >= j) throw UsageError("dataset: label out of range");
  std::unordered_set<std::int64_t> seen;
  for (const std::int64_t id : ds.ids)
    if (!seen.insert(id).second)
      throw UsageError("dataset: duplicate id " + std::to_string(id));
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw UsageError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_fields(line);
  if (header.empty() || header[0] != "label")
    throw UsageError(path + ":1: header must start with 'label'");
  if (header.size() < 2)
    throw UsageError(path + ":1: header declares no feature columns");
  const std::size_t d = header.size() - 1;

  Dataset ds;
  std::unordered_map<std::string, std::int32_t> label_ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != d + 1)
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(d + 1) + " fields, got " +
                       std::to_string(fields.size()));
    const auto [it, inserted] = label_ids.try_emplace(
        fields[0], static_cast<std::int32_t>(ds.class_names.size()));
    if (inserted) ds.class_names.push_back(fields[0]);
    ds.labels.push_back(it->second);
    Vec row(d);
    for (std::size_t i = 0; i < d; ++i)
      row[i] = parse_feature(fields[i + 1], path, line_no);
    ds.features.push_back(std::move(row));
    ds.ids.push_back(static_cast<std::int64_t>(ds.features.size()) - 1);
  }
  if (ds.features.empty()) throw UsageError(path + ": no data rows");
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  validate(ds);
  std::ofstream out(path);
  if (!out) throw UsageError(path + ": cannot open for writing");
  out << "label";
  for (std::size_t i = 0; i < ds.dim(); ++i) out << ",f" << i;
  out << "\n";
  char buf[64];
  for (std::size_t r = 0; r < ds.size(); ++r) {
    out << ds.class_names[static_cast<std::size_t>(ds.labels[r])];
    for (const double v : ds.features[r]) {
      // 17 significant digits round-trip doubles exactly through strtod.
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) throw UsageError(path + ": write failed");
}

Dataset synth_clusters(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.classes < 2) throw UsageError("synth: need at least 2 classes");
  if (spec.per_class < 2)
    throw UsageError("synth: need at least 2 samples per class");
  if (spec.dim == 0) throw UsageError("synth: dim must be positive");
  if (spec.classes > 2 * spec.dim)
    throw UsageError(
        "synth: more than 2*dim classes would repeat center directions");
  if (!(spec.sigma > 0.0)) throw UsageError("synth: sigma must be > 0");
  if (!(spec.spacing >= 0.0)) throw UsageError("synth: spacing must be >= 0");

  Rng rng(derive_seed(seed, "synth"));
  Dataset ds;
  const double offset = spec.spacing * spec.sigma;
  for (std::size_t j = 0; j < spec.classes; ++j) {
    ds.class_names.push_back(std::to_string(j));
    const std::size_t axis = j % spec.dim;
    const double sign = j < spec.dim ? 1.0 : -1.0;
    for (std::size_t k = 0; k < spec.per_class; ++k) {
      Vec x(spec.dim, 0.0);
      for (std::size_t c = 0; c < spec.dim; ++c)
        x[c] = spec.sigma * rng.normal();
      x[axis] += sign * offset;
      ds.features.push_back(std::move(x));
      ds.labels.push_back(static_cast<std::int32_t>(j));
      ds.ids.push_back(static_cast<std::int64_t>(ds.features.size()) - 1);
    }
  }
  return ds;
}

SplitResult train_test_split(const Dataset& ds, const SplitSpec& spec) {
  validate(ds);
  if (!(spec.train_fraction > 0.0) || !(spec.train_fraction < 1.0))
    throw UsageError("split: train_fraction must be in (0, 1)");

  Rng rng(derive_seed(spec.seed, "split"));
  std::vector<std::size_t> train_rows, test_rows;
  if (spec.stratified) {
    const std::vector<std::size_t> counts = ds.class_counts();
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
    for (std::size_t j = 0; j < counts.size(); ++j)
      if (counts[j] < 2)
        throw UsageError("split: class '" + ds.class_names[j] +
                         "' has fewer than 2 samples; stratified split "
                         "needs both sides populated");
    for (std::size_t r = 0; r < ds.size(); ++r)
      by_class[static_cast<std::size_t>(ds.labels[r])].push_back(r);
    for (auto& rows : by_class) {
      rng.shuffle(rows);
      const auto n_train = static_cast<std::size_t>(
          std::floor(spec.train_fraction * static_cast<double>(rows.size())));
      train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + n_train);
      test_rows.insert(test_rows.end(), rows.begin() + n_train, rows.end());
    }
  } else {
    std::vector<std::size_t> rows(ds.size());
    for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r;
    rng.shuffle(rows);
    const auto n_train = static_cast<std::size_t>(
        std::floor(spec.train_fraction * static_cast<double>(rows.size())));
    train_rows.assign(rows.begin(), rows.begin() + n_train);
    test_rows.assign(rows.begin() + n_train, rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  auto take = [&ds](const std::vector<std::size_t>& rows) {
    Dataset side;
    side.class_names = ds.class_names;  // shared table keeps labels aligned
    for (const std::size_t r : rows) {
      side.labels.push_back(ds.labels[r]);
      side.features.push_back(ds.features[r]);
      side.ids.push_back(ds.ids[r]);
    }
    return side;
  };
  return SplitResult{take(train_rows), take(test_rows)};
}

}  // namespace ocam
