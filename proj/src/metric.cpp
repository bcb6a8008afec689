#include "ocam/metric.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "ocam/error.hpp"

namespace ocam {

namespace {

void require_same_length(std::span<const double> u,
                         std::span<const double> v) {
  if (u.size() != v.size())
    throw UsageError("distance: vector length mismatch (" +
                     std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()) + ")");
  if (u.empty()) throw UsageError("distance: empty vector");
}

double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

}  // namespace

const char* to_string(Metric m) {
  return m == Metric::cosine ? "cosine" : "euclidean";
}

Metric metric_from_string(std::string_view s) {
  if (s == "cosine") return Metric::cosine;
  if (s == "euclidean") return Metric::euclidean;
  throw UsageError("unknown metric: '" + std::string(s) + "'");
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  require_same_length(u, v);
  const double nu = std::sqrt(dot(u, u));
  const double nv = std::sqrt(dot(v, v));
  if (nu == 0.0 || nv == 0.0)
    throw DomainError("cosine_distance: zero-norm input");
  const double c = dot(u, v) / (nu * nv);
  return std::clamp((1.0 - c) / 2.0, 0.0, 1.0);
}

double euclidean_distance(std::span<const double> u,
                          std::span<const double> v) {
  require_same_length(u, v);
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double distance(Metric metric, std::span<const double> u,
                std::span<const double> v) {
  return metric == Metric::cosine ? cosine_distance(u, v)
                                  : euclidean_distance(u, v);
}

PairDistanceGrad cosine_distance_grad(std::span<const double> u,
                                      std::span<const double> v) {
  require_same_length(u, v);
  const std::size_t n = u.size();
  const double nu = std::sqrt(dot(u, u));
  const double nv = std::sqrt(dot(v, v));
  if (nu == 0.0 || nv == 0.0)
    throw DomainError("cosine_distance: zero-norm input");
  const double c = dot(u, v) / (nu * nv);
  PairDistanceGrad out;
  out.value = std::clamp((1.0 - c) / 2.0, 0.0, 1.0);
  out.d_lhs.assign(n, 0.0);
  out.d_rhs.assign(n, 0.0);
  const double inv = 1.0 / (nu * nv);
  const double inv_uu = c / (nu * nu);
  const double inv_vv = c / (nv * nv);
  for (std::size_t i = 0; i < n; ++i) {
    out.d_lhs[i] = -0.5 * (v[i] * inv - u[i] * inv_uu);
    out.d_rhs[i] = -0.5 * (u[i] * inv - v[i] * inv_vv);
  }
  return out;
}

PairDistanceGrad euclidean_distance_grad(std::span<const double> u,
                                         std::span<const double> v) {
  require_same_length(u, v);
  const std::size_t n = u.size();
  PairDistanceGrad out;
  out.d_lhs.assign(n, 0.0);
  out.d_rhs.assign(n, 0.0);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  out.value = std::sqrt(s);
  if (out.value > 0.0) {
    const double inv = 1.0 / out.value;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = (u[i] - v[i]) * inv;
      out.d_lhs[i] = g;
      out.d_rhs[i] = -g;
    }
  }
  return out;
}

PairDistanceGrad distance_grad(Metric metric, std::span<const double> u,
                               std::span<const double> v) {
  return metric == Metric::cosine ? cosine_distance_grad(u, v)
                                  : euclidean_distance_grad(u, v);
}

HashCode binarize(std::span<const double> embedding) {
  if (embedding.empty()) throw UsageError("binarize: empty embedding");
  HashCode code;
  code.bits.resize(embedding.size());
  for (std::size_t i = 0; i < embedding.size(); ++i) {
    if (!std::isfinite(embedding[i]))
      throw UsageError("binarize: non-finite entry at index " +
                       std::to_string(i));
    code.bits[i] = embedding[i] >= 0.0 ? 1 : -1;
  }
  return code;
}

std::uint64_t hamming_distance(const HashCode& a, const HashCode& b) {
  if (a.bits.size() != b.bits.size())
    throw UsageError("hamming_distance: code length mismatch");
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i)
    n += a.bits[i] != b.bits[i] ? 1u : 0u;
  return n;
}

PackedCode pack(const HashCode& code) {
  PackedCode out;
  out.length = static_cast<std::uint32_t>(code.bits.size());
  out.words.assign((code.bits.size() + 63) / 64, 0);
  for (std::size_t i = 0; i < code.bits.size(); ++i)
    if (code.bits[i] > 0) out.words[i / 64] |= std::uint64_t{1} << (i % 64);
  return out;
}

std::uint64_t hamming_distance(const PackedCode& a, const PackedCode& b) {
  if (a.length != b.length)
    throw UsageError("hamming_distance: code length mismatch");
  std::uint64_t n = 0;
  for (std::size_t w = 0; w < a.words.size(); ++w)
    n += static_cast<std::uint64_t>(std::popcount(a.words[w] ^ b.words[w]));
  return n;
}

}  // namespace ocam
