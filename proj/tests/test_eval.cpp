#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "ocam/corpus.hpp"
#include "ocam/error.hpp"
#include "ocam/eval.hpp"
#include "ocam/model.hpp"
#include "ocam/rng.hpp"
#include "oracles.hpp"

using ocam::Dataset;
using ocam::EvalOptions;
using ocam::EvalReport;
using ocam::MapMode;
using ocam::ModelParams;
using ocam::Rng;
using ocam::Space;
using ocam::Vec;

namespace {

// Single linear layer wired as the identity: embeddings equal features,
// so the protocol can be recomputed with plain loops.
ModelParams identity_model(std::size_t d) {
  ModelParams m;
  m.input_dim = d;
  m.output_dim = d;
  ocam::Layer l;
  l.out_dim = d;
  l.in_dim = d;
  l.weights.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) l.weights[i * d + i] = 1.0;
  l.biases.assign(d, 0.0);
  m.layers.push_back(std::move(l));
  return m;
}

double space_distance(Space space, const Vec& a, const Vec& b) {
  switch (space) {
    case Space::euclidean:
      return oracle::euclid_f(a, b);
    case Space::cosine:
      return oracle::cosine_f(a, b);
    case Space::hamming:
      return static_cast<double>(oracle::sign_mismatches(a, b));
  }
  return 0.0;
}

struct OracleCell {
  double p_macro = 0.0, map_std = 0.0, map_aw = 0.0;
  std::vector<double> p_class, std_class, aw_class;
};

// Leave-one-out retrieval metrics recomputed exhaustively.
OracleCell oracle_cell(const Dataset& ds, Space space, std::size_t z) {
  const std::size_t J = ds.num_classes();
  const auto counts = ds.class_counts();
  OracleCell cell;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  cell.p_class.assign(J, nan);
  cell.std_class.assign(J, nan);
  cell.aw_class.assign(J, nan);
  std::size_t included = 0;
  for (std::size_t c = 0; c < J; ++c) {
    if (counts[c] < 2) continue;
    ++included;
    double p = 0.0, ap_s = 0.0, ap_a = 0.0;
    std::size_t nq = 0;
    for (std::size_t r = 0; r < ds.size(); ++r) {
      if (static_cast<std::size_t>(ds.labels[r]) != c) continue;
      ++nq;
      const auto hits = oracle::topz(
          ds.features, ds.ids, ds.features[r], z,
          [&](const Vec& a, const Vec& b) {
            return space_distance(space, a, b);
          },
          ds.ids[r]);
      std::vector<int> rel;
      for (const auto& h : hits) {
        for (std::size_t j = 0; j < ds.size(); ++j)
          if (ds.ids[j] == h.id) {
            rel.push_back(ds.labels[j] == ds.labels[r] ? 1 : 0);
            break;
          }
      }
      p += oracle::precision(rel);
      ap_s += oracle::ap_standard(rel);
      ap_a += oracle::ap_as_written(rel);
    }
    cell.p_class[c] = p / static_cast<double>(nq);
    cell.std_class[c] = ap_s / static_cast<double>(nq);
    cell.aw_class[c] = ap_a / static_cast<double>(nq);
    cell.p_macro += cell.p_class[c];
    cell.map_std += cell.std_class[c];
    cell.map_aw += cell.aw_class[c];
  }
  cell.p_macro /= static_cast<double>(included);
  cell.map_std /= static_cast<double>(included);
  cell.map_aw /= static_cast<double>(included);
  return cell;
}

Dataset scrambled_dataset(Rng& rng, const std::vector<std::size_t>& sizes,
                          std::size_t d) {
  Dataset ds;
  std::vector<std::int64_t> ids;
  std::size_t total = 0;
  for (const std::size_t n : sizes) total += n;
  for (std::size_t i = 0; i < total; ++i)
    ids.push_back(static_cast<std::int64_t>(1000 + 3 * i));
  rng.shuffle(ids);
  std::size_t next = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    ds.class_names.push_back("k" + std::to_string(c));
    for (std::size_t i = 0; i < sizes[c]; ++i) {
      Vec v(d);
      for (double& x : v) x = rng.uniform(-2.0, 2.0);
      ds.features.push_back(std::move(v));
      ds.labels.push_back(static_cast<std::int32_t>(c));
      ds.ids.push_back(ids[next++]);
    }
  }
  return ds;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("precision over a fixed relevance list") {
  CHECK(ocam::precision_at_z({1, 0, 1}) == doctest::Approx(2.0 / 3.0));
  CHECK(ocam::precision_at_z({0, 0}) == 0.0);
  CHECK(ocam::precision_at_z({1}) == 1.0);
  CHECK_THROWS_AS(ocam::precision_at_z({}), ocam::UsageError);
}

TEST_CASE("average precision in both modes") {
  CHECK(ocam::average_precision({1, 0, 1}, MapMode::standard) ==
        doctest::Approx(5.0 / 6.0));
  CHECK(ocam::average_precision({1, 0, 1}, MapMode::as_written) ==
        doctest::Approx(4.0 / 9.0));
  CHECK(ocam::average_precision({1, 0, 0}, MapMode::as_written) ==
        doctest::Approx(1.0 / 3.0));
  CHECK(ocam::average_precision({0, 0, 0}, MapMode::standard) == 0.0);
  CHECK(ocam::average_precision({0, 0, 0}, MapMode::as_written) == 0.0);
  CHECK(ocam::average_precision({1, 1}, MapMode::standard) == 1.0);
  // The as-written form divides by the list length, capping the score.
  CHECK(ocam::average_precision({1, 1}, MapMode::as_written) ==
        doctest::Approx(0.75));
  CHECK_THROWS_AS(ocam::average_precision({}, MapMode::standard),
                  ocam::UsageError);
}

TEST_CASE("random relevance lists agree with the oracle in both modes") {
  Rng rng(501);
  for (int it = 0; it < 500; ++it) {
    std::vector<int> rel(1 + rng.uniform_int(30));
    for (int& r : rel) r = rng.uniform() < 0.3 ? 1 : 0;
    CHECK(ocam::precision_at_z(rel) == doctest::Approx(oracle::precision(rel))
                                           .epsilon(1e-14));
    CHECK(ocam::average_precision(rel, MapMode::standard) ==
          doctest::Approx(oracle::ap_standard(rel)).epsilon(1e-14));
    CHECK(ocam::average_precision(rel, MapMode::as_written) ==
          doctest::Approx(oracle::ap_as_written(rel)).epsilon(1e-14));
  }
}

TEST_CASE("map mode names round-trip") {
  CHECK(ocam::map_mode_from_string("standard") == MapMode::standard);
  CHECK(ocam::map_mode_from_string("as_written") == MapMode::as_written);
  CHECK_THROWS_AS(ocam::map_mode_from_string("other"), ocam::UsageError);
}

TEST_CASE("eval options validation") {
  EvalOptions good;
  CHECK_NOTHROW(ocam::validate(good));
  EvalOptions o = good;
  o.zs = {};
  CHECK_THROWS_AS(ocam::validate(o), ocam::UsageError);
  o = good;
  o.zs = {5, 0};
  CHECK_THROWS_AS(ocam::validate(o), ocam::UsageError);
  o = good;
  o.zs = {5, 5};
  CHECK_THROWS_AS(ocam::validate(o), ocam::UsageError);
  o = good;
  o.spaces = {};
  CHECK_THROWS_AS(ocam::validate(o), ocam::UsageError);
  o = good;
  o.spaces = {Space::euclidean, Space::euclidean};
  CHECK_THROWS_AS(ocam::validate(o), ocam::UsageError);
  o = good;
  o.threads = 0;
  CHECK_THROWS_AS(ocam::validate(o), ocam::UsageError);
}

TEST_CASE("protocol matches the exhaustive oracle") {
  Rng rng(502);
  const Dataset ds = scrambled_dataset(rng, {5, 1, 7, 4}, 4);
  const ModelParams model = identity_model(4);
  EvalOptions opts;
  opts.zs = {1, 3, 10, 50};
  opts.spaces = {Space::euclidean, Space::hamming, Space::cosine};
  const EvalReport report = ocam::evaluate(ds, model, opts);

  CHECK(report.m == ds.size());
  CHECK(report.included_classes == std::vector<std::size_t>{0, 2, 3});
  CHECK(report.excluded_classes == std::vector<std::size_t>{1});
  REQUIRE(report.warnings.size() == 1);
  CHECK(report.warnings[0].find("k1") != std::string::npos);

  REQUIRE(report.cells.size() == opts.spaces.size() * opts.zs.size());
  std::size_t cell_i = 0;
  for (const Space space : opts.spaces) {
    for (const std::size_t z : opts.zs) {
      const auto& cell = report.cells[cell_i++];
      CHECK(cell.space == space);
      CHECK(cell.z == z);
      const OracleCell want = oracle_cell(ds, space, z);
      CHECK(std::abs(cell.precision_macro - want.p_macro) <= 1e-12);
      CHECK(std::abs(cell.map_standard - want.map_std) <= 1e-12);
      CHECK(std::abs(cell.map_as_written - want.map_aw) <= 1e-12);
      for (std::size_t c = 0; c < ds.num_classes(); ++c) {
        if (std::isnan(want.p_class[c])) {
          CHECK(std::isnan(cell.precision_per_class[c]));
        } else {
          CHECK(std::abs(cell.precision_per_class[c] - want.p_class[c]) <=
                1e-12);
          CHECK(std::abs(cell.ap_standard_per_class[c] - want.std_class[c]) <=
                1e-12);
          CHECK(std::abs(cell.ap_as_written_per_class[c] -
                         want.aw_class[c]) <= 1e-12);
        }
      }
      // 17 candidates absorb z=10, but z=50 must flag the short lists.
      CHECK(cell.short_lists == (z == 50));
    }
  }
}

TEST_CASE("worker count never changes the numbers") {
  Rng rng(503);
  const Dataset ds = scrambled_dataset(rng, {6, 5, 7}, 5);
  const ModelParams model = identity_model(5);
  EvalOptions opts;
  opts.zs = {2, 8};
  opts.spaces = {Space::euclidean, Space::hamming};
  opts.threads = 1;
  const EvalReport a = ocam::evaluate(ds, model, opts);
  opts.threads = 3;
  const EvalReport b = ocam::evaluate(ds, model, opts);
  opts.threads = 16;  // more workers than queries per stride
  const EvalReport c = ocam::evaluate(ds, model, opts);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].precision_macro == b.cells[i].precision_macro);
    CHECK(a.cells[i].map_standard == b.cells[i].map_standard);
    CHECK(a.cells[i].map_as_written == b.cells[i].map_as_written);
    CHECK(a.cells[i].precision_macro == c.cells[i].precision_macro);
    CHECK(a.cells[i].map_standard == c.cells[i].map_standard);
    CHECK(a.cells[i].map_as_written == c.cells[i].map_as_written);
    CHECK(a.cells[i].precision_per_class == b.cells[i].precision_per_class);
  }
}

TEST_CASE("identical same-class points retrieve each other first") {
  Dataset ds;
  ds.class_names = {"a", "b"};
  for (int i = 0; i < 3; ++i) {
    ds.features.push_back(Vec{1.0, 2.0});
    ds.labels.push_back(0);
  }
  for (int i = 0; i < 3; ++i) {
    ds.features.push_back(Vec{-4.0, 5.0});
    ds.labels.push_back(1);
  }
  ds.ids = {0, 1, 2, 3, 4, 5};
  EvalOptions opts;
  opts.zs = {2};
  opts.spaces = {Space::euclidean};
  const EvalReport report = ocam::evaluate(ds, identity_model(2), opts);
  CHECK(report.cells[0].precision_macro == 1.0);
  CHECK(report.cells[0].map_standard == 1.0);
}

TEST_CASE("all-singleton corpus yields empty macros and a warning") {
  Dataset ds;
  ds.class_names = {"a", "b", "c"};
  ds.labels = {0, 1, 2};
  ds.features = {{1.0}, {2.0}, {3.0}};
  ds.ids = {0, 1, 2};
  EvalOptions opts;
  opts.zs = {1};
  opts.spaces = {Space::euclidean};
  const EvalReport report = ocam::evaluate(ds, identity_model(1), opts);
  CHECK(report.included_classes.empty());
  CHECK(std::isnan(report.cells[0].precision_macro));
  bool found = false;
  for (const auto& w : report.warnings)
    found = found || w.find("macro averages are empty") != std::string::npos;
  CHECK(found);
}

TEST_CASE("report renders stable json outside the volatile meta block") {
  Rng rng(504);
  const Dataset ds = scrambled_dataset(rng, {4, 3}, 3);
  const ModelParams model = identity_model(3);
  EvalOptions opts;
  opts.zs = {2, 5};
  opts.spaces = {Space::euclidean, Space::hamming};
  const std::map<std::string, std::string> config{{"seed", "42"},
                                                  {"loss.kind", "ocam"}};
  const EvalReport r1 = ocam::evaluate(ds, model, opts);
  const EvalReport r2 = ocam::evaluate(ds, model, opts);
  const std::string s1 =
      ocam::report_to_json(r1, config, 0xABCDull, 42, MapMode::standard);
  const std::string s2 =
      ocam::report_to_json(r2, config, 0xABCDull, 42, MapMode::standard);
  auto j1 = nlohmann::ordered_json::parse(s1);
  auto j2 = nlohmann::ordered_json::parse(s2);
  // The volatile block carries exactly these fields.
  CHECK(j1["meta"].contains("timestamp"));
  CHECK(j1["meta"].contains("wall_seconds"));
  CHECK(j1["meta"]["generator"] == "ocam");
  j1.erase("meta");
  j2.erase("meta");
  CHECK(j1.dump() == j2.dump());

  CHECK(j1["seed"] == 42);
  CHECK(j1["config"]["hash"] == "0x000000000000abcd");
  CHECK(j1["config"]["loss.kind"] == "ocam");
  CHECK(j1["protocol"]["leave_one_query_out"] == true);
  CHECK(j1["protocol"]["map_mode_default"] == "standard");
  CHECK(j1["dataset"]["M"] == 7);
  CHECK(j1["dataset"]["J"] == 2);
  CHECK(j1["results"].contains("euclidean"));
  CHECK(j1["results"]["euclidean"].contains("2"));
  CHECK(j1["results"]["hamming"].contains("5"));
  const auto& entry = j1["results"]["euclidean"]["2"];
  CHECK(entry.contains("precision"));
  CHECK(entry["precision"].contains("macro"));
  CHECK(entry["precision"]["macro"].is_number());
  CHECK(entry.contains("map_standard"));
  CHECK(entry.contains("map_as_written"));
}

TEST_CASE("nan macros render as json null") {
  Dataset ds;
  ds.class_names = {"a", "b"};
  ds.labels = {0, 1};
  ds.features = {{1.0}, {2.0}};
  ds.ids = {0, 1};
  EvalOptions opts;
  opts.zs = {1};
  opts.spaces = {Space::euclidean};
  const EvalReport report = ocam::evaluate(ds, identity_model(1), opts);
  const std::string s = ocam::report_to_json(report, {}, 0, 1,
                                             MapMode::standard);
  const auto j = nlohmann::ordered_json::parse(s);
  CHECK(j["results"]["euclidean"]["1"]["precision"]["macro"].is_null());
}

}  // TEST_SUITE
