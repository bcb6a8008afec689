#pragma once

#include <cstdint>
#include <vector>

#include "ocam/corpus.hpp"
#include "ocam/losses.hpp"
#include "ocam/model.hpp"
#include "ocam/rng.hpp"

namespace ocam {

struct TrainConfig {
  LossSpec loss;
  std::vector<std::size_t> hidden = {32};
  std::size_t embedding_dim = 16;
  Activation activation = Activation::relu;
  double dropout_rate = 0.0;
  std::size_t steps = 1500;
  std::size_t batch_size = 20;  // triplets (or pairs) per step
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 42;
  bool deterministic = true;
  std::size_t triep_classes = 4;    // mined-batch class count
  std::size_t triep_per_class = 5;  // samples drawn per mined class
};

void validate(const TrainConfig& cfg);

struct IndexTriplet {
  std::size_t anchor;
  std::size_t positive;
  std::size_t negative;
};

using TripletBatch = std::vector<IndexTriplet>;

struct IndexPair {
  std::size_t first;
  std::size_t second;
  bool same_class;
};

// Anchors are uniform over rows whose class has another member; the
// positive is a uniform same-class other row; the negative is uniform
// over all rows of other classes.
TripletBatch sample_triplets(const Dataset& ds, std::size_t batch_size,
                             Rng& rng);

// Alternates same-class and different-class pairs (even slots same) so a
// batch is never all-attract or all-repel.
std::vector<IndexPair> sample_pairs(const Dataset& ds, std::size_t batch_size,
                                    Rng& rng);

// Class-grouped rows for mined losses: up to `classes` distinct classes
// having >= 2 members, up to `per_class` distinct rows from each.
struct GroupedIndexBatch {
  std::vector<std::size_t> rows;
};

GroupedIndexBatch sample_grouped(const Dataset& ds, std::size_t classes,
                                 std::size_t per_class, Rng& rng);

// Moment accumulators shaped like the model, plus the shared step count.
struct AdamState {
  std::vector<Vec> m_weights, v_weights;
  std::vector<Vec> m_biases, v_biases;
  std::uint64_t step = 0;
};

AdamState zero_state_like(const ModelParams& m);

// One bias-corrected Adam update on a single parameter block. `step` is
// the post-increment counter (first call passes 1). Throws DomainError
// on a non-finite gradient entry.
void adam_update(Vec& param, const Vec& grad, Vec& m, Vec& v,
                 std::uint64_t step, double lr, double beta1, double beta2,
                 double epsilon);

void adam_step(ModelParams& params, const ModelGrads& grads, AdamState& state,
               const TrainConfig& cfg);

struct TrainResult {
  ModelParams model;
  std::vector<double> history;  // mean batch loss per step
};

// Deterministic training loop: (dataset, config, seed) fixes the result
// bit-exactly. Cross-entropy trains through a softmax head of J outputs
// that is dropped from the returned model; the embedding stays the
// model's own output.
TrainResult train(const Dataset& ds, const TrainConfig& cfg);

}  // namespace ocam
