#include "ocam/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "ocam/error.hpp"

namespace ocam {

namespace {

constexpr char kMagic[8] = {'O', 'C', 'A', 'M', 'M', 'D', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

double act_apply(Activation a, double z) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

double act_deriv(Activation a, double z) {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void read_raw(std::ifstream& in, T& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw UsageError(path + ": truncated model file");
}

}  // namespace

const char* to_string(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw UsageError("unknown activation: '" + std::string(s) + "'");
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.weights.size() + l.biases.size();
  return n;
}

ModelParams init_model(std::size_t input_dim,
                       const std::vector<std::size_t>& hidden,
                       std::size_t output_dim, std::uint64_t seed,
                       Activation activation, double dropout_rate) {
  if (input_dim == 0 || output_dim == 0)
    throw UsageError("init_model: zero dimension");
  for (const std::size_t h : hidden)
    if (h == 0) throw UsageError("init_model: zero hidden width");
  if (!(dropout_rate >= 0.0) || !(dropout_rate < 1.0))
    throw UsageError("init_model: dropout_rate must be in [0, 1)");

  ModelParams m;
  m.input_dim = input_dim;
  m.output_dim = output_dim;
  m.activation = activation;
  m.dropout_rate = dropout_rate;
  Rng rng(seed);
  std::size_t in = input_dim;
  auto add_layer = [&](std::size_t out) {
    Layer l;
    l.out_dim = out;
    l.in_dim = in;
    l.weights.resize(out * in);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : l.weights) w = rng.uniform(-bound, bound);
    l.biases.assign(out, 0.0);
    m.layers.push_back(std::move(l));
    in = out;
  };
  for (const std::size_t h : hidden) add_layer(h);
  add_layer(output_dim);
  return m;
}

void forward_trace(const ModelParams& m, std::span<const double> x,
                   bool training, Rng* rng, ForwardTrace& trace) {
  if (x.size() != m.input_dim)
    throw UsageError("forward: input length " + std::to_string(x.size()) +
                     " does not match model input dim " +
                     std::to_string(m.input_dim));
  if (m.layers.empty()) throw UsageError("forward: model has no layers");

  const std::size_t n_layers = m.layers.size();
  trace.inputs.assign(n_layers, {});
  trace.preacts.assign(n_layers, {});
  trace.dropout_scale.clear();

  const bool drop = training && m.dropout_rate > 0.0;
  if (drop && rng == nullptr)
    throw UsageError("forward: dropout in training mode needs an rng");

  Vec cur(x.begin(), x.end());
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Layer& layer = m.layers[l];
    if (drop && l == n_layers - 1) {
      const double keep = 1.0 - m.dropout_rate;
      trace.dropout_scale.assign(cur.size(), 0.0);
      for (std::size_t i = 0; i < cur.size(); ++i) {
        const double s = rng->uniform() < m.dropout_rate ? 0.0 : 1.0 / keep;
        trace.dropout_scale[i] = s;
        cur[i] *= s;
      }
    }
    trace.inputs[l] = cur;
    Vec pre(layer.out_dim);
    for (std::size_t o = 0; o < layer.out_dim; ++o) {
      double s = layer.biases[o];
      const double* row = layer.weights.data() + o * layer.in_dim;
      for (std::size_t i = 0; i < layer.in_dim; ++i) s += row[i] * cur[i];
      pre[o] = s;
    }
    trace.preacts[l] = pre;
    if (l + 1 < n_layers) {
      cur.resize(layer.out_dim);
      for (std::size_t o = 0; o < layer.out_dim; ++o)
        cur[o] = act_apply(m.activation, pre[o]);
    } else {
      cur = std::move(pre);
    }
  }
  trace.output = cur;
}

Vec forward(const ModelParams& m, std::span<const double> x, bool training,
            Rng* rng) {
  ForwardTrace trace;
  forward_trace(m, x, training, rng, trace);
  return trace.output;
}

ModelGrads zero_grads_like(const ModelParams& m) {
  ModelGrads g;
  g.d_weights.reserve(m.layers.size());
  g.d_biases.reserve(m.layers.size());
  for (const Layer& l : m.layers) {
    g.d_weights.emplace_back(l.weights.size(), 0.0);
    g.d_biases.emplace_back(l.biases.size(), 0.0);
  }
  return g;
}

void backward(const ModelParams& m, const ForwardTrace& trace,
              std::span<const double> d_output, double coef,
              ModelGrads& grads, Vec* d_input) {
  const std::size_t n_layers = m.layers.size();
  if (d_output.size() != m.output_dim)
    throw UsageError("backward: gradient length mismatch");
  if (trace.inputs.size() != n_layers)
    throw UsageError("backward: trace does not match model");

  Vec delta(d_output.size());
  for (std::size_t i = 0; i < delta.size(); ++i)
    delta[i] = coef * d_output[i];

  for (std::size_t li = n_layers; li-- > 0;) {
    const Layer& layer = m.layers[li];
    const Vec& input = trace.inputs[li];
    Vec& dw = grads.d_weights[li];
    Vec& db = grads.d_biases[li];
    for (std::size_t o = 0; o < layer.out_dim; ++o) {
      const double d = delta[o];
      db[o] += d;
      double* row = dw.data() + o * layer.in_dim;
      for (std::size_t i = 0; i < layer.in_dim; ++i) row[i] += d * input[i];
    }
    if (li == 0 && d_input == nullptr) break;
    Vec down(layer.in_dim, 0.0);
    for (std::size_t o = 0; o < layer.out_dim; ++o) {
      const double d = delta[o];
      const double* row = layer.weights.data() + o * layer.in_dim;
      for (std::size_t i = 0; i < layer.in_dim; ++i) down[i] += d * row[i];
    }
    if (li == n_layers - 1 && !trace.dropout_scale.empty())
      for (std::size_t i = 0; i < down.size(); ++i)
        down[i] *= trace.dropout_scale[i];
    if (li == 0) {
      *d_input = std::move(down);
      break;
    }
    const Vec& pre_prev = trace.preacts[li - 1];
    delta.resize(layer.in_dim);
    for (std::size_t i = 0; i < layer.in_dim; ++i)
      delta[i] = down[i] * act_deriv(m.activation, pre_prev[i]);
  }
}

void save_model(const ModelParams& m, std::uint64_t config_hash,
                const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError(path + ": cannot open for writing");
  out.write(kMagic, sizeof kMagic);
  write_raw(out, kVersion);
  const std::uint32_t act = m.activation == Activation::relu ? 0u : 1u;
  write_raw(out, act);
  write_raw(out, m.dropout_rate);
  write_raw(out, config_hash);
  write_raw(out, static_cast<std::uint64_t>(m.input_dim));
  write_raw(out, static_cast<std::uint64_t>(m.output_dim));
  write_raw(out, static_cast<std::uint32_t>(m.layers.size()));
  for (const Layer& l : m.layers) {
    write_raw(out, static_cast<std::uint64_t>(l.out_dim));
    write_raw(out, static_cast<std::uint64_t>(l.in_dim));
    out.write(reinterpret_cast<const char*>(l.weights.data()),
              static_cast<std::streamsize>(l.weights.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(l.biases.data()),
              static_cast<std::streamsize>(l.biases.size() * sizeof(double)));
  }
  if (!out) throw UsageError(path + ": write failed");
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(path + ": cannot open");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw UsageError(path + ": not a model file");
  std::uint32_t version = 0;
  read_raw(in, version, path);
  if (version != kVersion)
    throw UsageError(path + ": unsupported model version " +
                     std::to_string(version));
  LoadedModel out;
  std::uint32_t act = 0;
  read_raw(in, act, path);
  if (act > 1) throw UsageError(path + ": bad activation code");
  out.model.activation = act == 0 ? Activation::relu : Activation::tanh;
  read_raw(in, out.model.dropout_rate, path);
  read_raw(in, out.config_hash, path);
  std::uint64_t in_dim = 0, out_dim = 0;
  read_raw(in, in_dim, path);
  read_raw(in, out_dim, path);
  std::uint32_t n_layers = 0;
  read_raw(in, n_layers, path);
  if (in_dim == 0 || out_dim == 0 || n_layers == 0)
    throw UsageError(path + ": degenerate model header");
  out.model.input_dim = in_dim;
  out.model.output_dim = out_dim;
  std::size_t expect_in = in_dim;
  for (std::uint32_t li = 0; li < n_layers; ++li) {
    Layer l;
    std::uint64_t o = 0, i = 0;
    read_raw(in, o, path);
    read_raw(in, i, path);
    if (i != expect_in)
      throw UsageError(path + ": layer " + std::to_string(li) +
                       " input dim does not chain");
    l.out_dim = o;
    l.in_dim = i;
    l.weights.resize(o * i);
    l.biases.resize(o);
    in.read(reinterpret_cast<char*>(l.weights.data()),
            static_cast<std::streamsize>(l.weights.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(l.biases.data()),
            static_cast<std::streamsize>(l.biases.size() * sizeof(double)));
    if (!in) throw UsageError(path + ": truncated model file");
    for (const double w : l.weights)
      if (!std::isfinite(w)) throw UsageError(path + ": non-finite weight");
    for (const double b : l.biases)
      if (!std::isfinite(b)) throw UsageError(path + ": non-finite bias");
    expect_in = o;
    out.model.layers.push_back(std::move(l));
  }
  if (expect_in != out_dim)
    throw UsageError(path + ": last layer does not produce output dim");
  return out;
}

}  // namespace ocam
