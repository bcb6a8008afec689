#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "ocam/corpus.hpp"
#include "ocam/error.hpp"
#include "ocam/losses.hpp"
#include "ocam/rng.hpp"
#include "ocam/trainer.hpp"

using ocam::Dataset;
using ocam::LossKind;
using ocam::Rng;
using ocam::SynthSpec;
using ocam::TrainConfig;
using ocam::Vec;

namespace {

Dataset two_tight_classes() {
  Dataset ds;
  ds.class_names = {"a", "b"};
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 6; ++i) {
      ds.labels.push_back(c);
      ds.features.push_back(
          Vec{c * 10.0 + 0.1 * i, c * -10.0 + 0.1 * i});
      ds.ids.push_back(c * 6 + i);
    }
  return ds;
}

Dataset clustered(std::size_t classes, std::size_t per_class,
                  std::size_t dim, std::uint64_t seed) {
  SynthSpec spec;
  spec.classes = classes;
  spec.per_class = per_class;
  spec.dim = dim;
  return ocam::synth_clusters(spec, seed);
}

bool models_equal(const ocam::ModelParams& a, const ocam::ModelParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    if (a.layers[i].weights != b.layers[i].weights ||
        a.layers[i].biases != b.layers[i].biases)
      return false;
  return true;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("config validation rejects out-of-domain values") {
  TrainConfig good;
  CHECK_NOTHROW(ocam::validate(good));
  TrainConfig c = good;
  c.steps = 0;
  CHECK_THROWS_AS(ocam::validate(c), ocam::UsageError);
  c = good;
  c.batch_size = 0;
  CHECK_THROWS_AS(ocam::validate(c), ocam::UsageError);
  c = good;
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(ocam::validate(c), ocam::UsageError);
  c = good;
  c.adam_beta1 = 1.0;
  CHECK_THROWS_AS(ocam::validate(c), ocam::UsageError);
  c = good;
  c.adam_beta2 = -0.1;
  CHECK_THROWS_AS(ocam::validate(c), ocam::UsageError);
  c = good;
  c.adam_epsilon = 0.0;
  CHECK_THROWS_AS(ocam::validate(c), ocam::UsageError);
  c = good;
  c.embedding_dim = 0;
  CHECK_THROWS_AS(ocam::validate(c), ocam::UsageError);
  c = good;
  c.dropout_rate = 1.0;
  CHECK_THROWS_AS(ocam::validate(c), ocam::UsageError);
  // Mined-batch shape limits only bind for the kind that uses them.
  c = good;
  c.triep_classes = 1;
  CHECK_NOTHROW(ocam::validate(c));
  c.loss = ocam::make_loss_spec(LossKind::triep);
  CHECK_THROWS_AS(ocam::validate(c), ocam::UsageError);
  c = good;
  c.loss = ocam::make_loss_spec(LossKind::triep);
  c.triep_per_class = 1;
  CHECK_THROWS_AS(ocam::validate(c), ocam::UsageError);
}

TEST_CASE("sampled triplets are always class-valid") {
  const Dataset ds = clustered(3, 7, 4, 50);
  Rng rng(1);
  const auto batch = ocam::sample_triplets(ds, 10000, rng);
  REQUIRE(batch.size() == 10000);
  for (const auto& t : batch) {
    CHECK(t.anchor != t.positive);
    CHECK(ds.labels[t.anchor] == ds.labels[t.positive]);
    CHECK(ds.labels[t.anchor] != ds.labels[t.negative]);
  }
}

TEST_CASE("triplet sampling needs two populated classes") {
  Dataset ds;
  ds.class_names = {"only"};
  ds.labels = {0, 0, 0};
  ds.features = {{1.0}, {2.0}, {3.0}};
  ds.ids = {0, 1, 2};
  Rng rng(2);
  CHECK_THROWS_AS(ocam::sample_triplets(ds, 1, rng), ocam::UsageError);

  // Two classes but no class has two members: no anchor exists.
  ds.class_names = {"a", "b"};
  ds.labels = {0, 1};
  ds.features = {{1.0}, {2.0}};
  ds.ids = {0, 1};
  CHECK_THROWS_AS(ocam::sample_triplets(ds, 1, rng), ocam::UsageError);
}

TEST_CASE("sampled pairs alternate same and different classes") {
  const Dataset ds = clustered(3, 6, 4, 51);
  Rng rng(3);
  const auto pairs = ocam::sample_pairs(ds, 400, rng);
  REQUIRE(pairs.size() == 400);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    CHECK(p.same_class == (i % 2 == 0));
    CHECK(p.first != p.second);
    if (p.same_class)
      CHECK(ds.labels[p.first] == ds.labels[p.second]);
    else
      CHECK(ds.labels[p.first] != ds.labels[p.second]);
  }
}

TEST_CASE("grouped sampling draws distinct rows from eligible classes") {
  const Dataset ds = clustered(5, 6, 4, 52);
  Rng rng(4);
  for (int it = 0; it < 50; ++it) {
    const auto batch = ocam::sample_grouped(ds, 3, 4, rng);
    CHECK(batch.rows.size() == 12);
    std::set<std::size_t> unique(batch.rows.begin(), batch.rows.end());
    CHECK(unique.size() == batch.rows.size());
    std::set<std::int32_t> classes;
    for (const std::size_t r : batch.rows) classes.insert(ds.labels[r]);
    CHECK(classes.size() == 3);
    // Per-class row counts respect the cap.
    for (const std::int32_t c : classes) {
      std::size_t n = 0;
      for (const std::size_t r : batch.rows) n += ds.labels[r] == c ? 1 : 0;
      CHECK(n == 4);
    }
  }
}

TEST_CASE("grouped sampling clips to what the corpus offers") {
  const Dataset ds = clustered(2, 3, 4, 53);
  Rng rng(5);
  const auto batch = ocam::sample_grouped(ds, 4, 5, rng);
  CHECK(batch.rows.size() == 6);  // 2 classes x 3 rows available
}

TEST_CASE("adam first step on a quadratic moves by the learning rate") {
  Vec w{1.0};
  const Vec g{2.0};  // d/dw of w^2 at w=1
  Vec m{0.0}, v{0.0};
  ocam::adam_update(w, g, m, v, 1, 1e-3, 0.9, 0.999, 1e-8);
  // Bias-corrected first step is lr * g / (|g| + eps): one learning rate.
  CHECK(w[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-8));
}

TEST_CASE("adam with a constant gradient keeps unit-speed steps") {
  Vec w{5.0};
  Vec m{0.0}, v{0.0};
  const Vec g{0.25};
  double prev = w[0];
  for (std::uint64_t step = 1; step <= 10; ++step) {
    ocam::adam_update(w, g, m, v, step, 1e-3, 0.9, 0.999, 1e-8);
    CHECK(prev - w[0] == doctest::Approx(1e-3).epsilon(1e-6));
    prev = w[0];
  }
}

TEST_CASE("adam rejects non-finite gradients") {
  Vec w{1.0};
  Vec m{0.0}, v{0.0};
  const Vec g{std::nan("")};
  CHECK_THROWS_AS(ocam::adam_update(w, g, m, v, 1, 1e-3, 0.9, 0.999, 1e-8),
                  ocam::DomainError);
}

TEST_CASE("training is bit-deterministic") {
  const Dataset ds = clustered(4, 10, 8, 60);
  TrainConfig cfg;
  cfg.hidden = {12};
  cfg.embedding_dim = 6;
  cfg.steps = 40;
  cfg.batch_size = 8;
  cfg.seed = 7;
  for (const LossKind kind :
       {LossKind::ocam, LossKind::contrastive, LossKind::cross_entropy,
        LossKind::triep}) {
    cfg.loss = ocam::make_loss_spec(kind);
    const auto a = ocam::train(ds, cfg);
    const auto b = ocam::train(ds, cfg);
    CHECK(models_equal(a.model, b.model));
    CHECK(a.history == b.history);
    TrainConfig other = cfg;
    other.seed = 8;
    const auto c = ocam::train(ds, other);
    CHECK_FALSE(models_equal(a.model, c.model));
  }
}

TEST_CASE("training with dropout stays deterministic") {
  const Dataset ds = clustered(3, 8, 6, 61);
  TrainConfig cfg;
  cfg.hidden = {10};
  cfg.embedding_dim = 5;
  cfg.steps = 30;
  cfg.batch_size = 6;
  cfg.dropout_rate = 0.3;
  const auto a = ocam::train(ds, cfg);
  const auto b = ocam::train(ds, cfg);
  CHECK(models_equal(a.model, b.model));
}

TEST_CASE("every loss kind reduces its own training loss") {
  const Dataset ds = clustered(4, 12, 8, 62);
  for (int k = 0; k < ocam::kNumLossKinds; ++k) {
    const auto kind = static_cast<LossKind>(k);
    TrainConfig cfg;
    cfg.loss = ocam::make_loss_spec(kind);
    cfg.hidden = {16};
    cfg.embedding_dim = 8;
    cfg.steps = 200;
    cfg.batch_size = 10;
    cfg.seed = 99;
    const auto result = ocam::train(ds, cfg);
    REQUIRE(result.history.size() == 200);
    for (const double v : result.history) CHECK(std::isfinite(v));
    const double first = std::accumulate(result.history.begin(),
                                         result.history.begin() + 100, 0.0) /
                         100.0;
    const double last = std::accumulate(result.history.end() - 100,
                                        result.history.end(), 0.0) /
                        100.0;
    CHECK_MESSAGE(last < first, std::string(ocam::to_string(kind))
                                    << ": first-100 mean " << first
                                    << " vs last-100 mean " << last);
  }
}

TEST_CASE("classification training drops the softmax head") {
  const Dataset ds = clustered(3, 8, 6, 63);
  TrainConfig cfg;
  cfg.loss = ocam::make_loss_spec(LossKind::cross_entropy);
  cfg.hidden = {10};
  cfg.embedding_dim = 4;
  cfg.steps = 20;
  cfg.batch_size = 5;
  const auto result = ocam::train(ds, cfg);
  CHECK(result.model.output_dim == 4);
  CHECK(result.model.layers.back().out_dim == 4);
  // Embeddings come out at the configured width, not the class count.
  const Vec e = ocam::forward(result.model, ds.features[0]);
  CHECK(e.size() == 4);
}

TEST_CASE("training rejects unusable corpora") {
  TrainConfig cfg;
  cfg.steps = 5;
  Dataset ds;
  ds.class_names = {"only"};
  ds.labels = {0, 0};
  ds.features = {{1.0, 2.0}, {3.0, 4.0}};
  ds.ids = {0, 1};
  CHECK_THROWS_AS(ocam::train(ds, cfg), ocam::UsageError);
  cfg.loss = ocam::make_loss_spec(LossKind::cross_entropy);
  CHECK_THROWS_AS(ocam::train(ds, cfg), ocam::UsageError);
  CHECK_THROWS_AS(ocam::train(Dataset{}, cfg), ocam::UsageError);
}

TEST_CASE("training separates two obvious classes") {
  const Dataset ds = two_tight_classes();
  TrainConfig cfg;
  cfg.hidden = {8};
  cfg.embedding_dim = 4;
  cfg.steps = 300;
  cfg.batch_size = 6;
  const auto result = ocam::train(ds, cfg);
  // After training, same-class cosine distances sit below cross-class.
  double same_max = 0.0, cross_min = 1.0;
  std::vector<Vec> emb;
  for (const Vec& x : ds.features)
    emb.push_back(ocam::forward(result.model, x));
  // Mirror the trainer's zero-norm guard; the all-zero input row can
  // land on a dead-relu embedding.
  for (Vec& e : emb) {
    bool all_zero = true;
    for (const double v : e) all_zero = all_zero && v == 0.0;
    if (all_zero) e[0] = 1e-8;
  }
  for (std::size_t i = 0; i < emb.size(); ++i)
    for (std::size_t j = i + 1; j < emb.size(); ++j) {
      const double f = ocam::cosine_distance(emb[i], emb[j]);
      if (ds.labels[i] == ds.labels[j])
        same_max = std::max(same_max, f);
      else
        cross_min = std::min(cross_min, f);
    }
  CHECK(same_max < cross_min);
}

}  // TEST_SUITE
