#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ocam/metric.hpp"
#include "ocam/rng.hpp"

namespace ocam {

enum class Activation { relu, tanh };

const char* to_string(Activation a);
Activation activation_from_string(std::string_view s);

// One dense layer; weights are row-major [out_dim x in_dim].
struct Layer {
  std::size_t out_dim = 0;
  std::size_t in_dim = 0;
  Vec weights;
  Vec biases;
};

// Feedforward embedder: hidden layers with the configured activation,
// identity output. Dropout, when enabled during training, acts on the
// input of the final layer only.
struct ModelParams {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Activation activation = Activation::relu;
  double dropout_rate = 0.0;
  std::vector<Layer> layers;

  std::size_t parameter_count() const;
};

// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero,
// fully determined by seed.
ModelParams init_model(std::size_t input_dim,
                       const std::vector<std::size_t>& hidden,
                       std::size_t output_dim, std::uint64_t seed,
                       Activation activation = Activation::relu,
                       double dropout_rate = 0.0);

// Intermediate state captured for backpropagation.
struct ForwardTrace {
  std::vector<Vec> inputs;   // per layer, after activation and dropout
  std::vector<Vec> preacts;  // per layer, before activation
  Vec dropout_scale;         // per unit of the last layer's input; empty if off
  Vec output;
};

// training=true applies dropout (keep probability 1 - rate, survivors
// scaled by 1/(1 - rate)); rng is required only in that case.
Vec forward(const ModelParams& m, std::span<const double> x,
            bool training = false, Rng* rng = nullptr);
void forward_trace(const ModelParams& m, std::span<const double> x,
                   bool training, Rng* rng, ForwardTrace& trace);

// Parameter gradients shaped like the model.
struct ModelGrads {
  std::vector<Vec> d_weights;
  std::vector<Vec> d_biases;
};

ModelGrads zero_grads_like(const ModelParams& m);

// Accumulates d(loss)/d(params) into grads given d(loss)/d(output),
// scaled by coef. ReLU uses subderivative 0 at the kink. d_input, when
// given, receives d(loss)/d(x) so stacked models can chain.
void backward(const ModelParams& m, const ForwardTrace& trace,
              std::span<const double> d_output, double coef,
              ModelGrads& grads, Vec* d_input = nullptr);

// Self-describing little-endian binary checkpoint; load is bit-exact.
void save_model(const ModelParams& m, std::uint64_t config_hash,
                const std::string& path);
struct LoadedModel {
  ModelParams model;
  std::uint64_t config_hash = 0;
};
LoadedModel load_model(const std::string& path);

}  // namespace ocam
