#pragma once

// Slow reference implementations the tests check the library against.
// Everything here is written from scratch with plain loops and shares no
// code with the library, so an agreement between the two is meaningful.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

// (1 - cos)/2 clamped into [0, 1].
inline double cosine_f(const Vec& a, const Vec& b) {
  const double c = dot(a, b) / (norm(a) * norm(b));
  double f = (1.0 - c) / 2.0;
  if (f < 0.0) f = 0.0;
  if (f > 1.0) f = 1.0;
  return f;
}

inline double euclid_f(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Anchor-positive hinge against the averaged opposing distances, written
// in expanded polynomial form: fAP - fAN/2 - fPN + 1/2, floored at zero.
inline double ocam_expanded(const Vec& a, const Vec& p, const Vec& n,
                            double (*f)(const Vec&, const Vec&)) {
  const double pre = f(a, p) - 0.5 * f(a, n) - f(p, n) + 0.5;
  return pre > 0.0 ? pre : 0.0;
}

// Central finite difference of f along coordinate i.
inline double central_diff(const std::function<double(const Vec&)>& f, Vec x,
                           std::size_t i, double h) {
  const double orig = x[i];
  x[i] = orig + h;
  const double up = f(x);
  x[i] = orig - h;
  const double dn = f(x);
  return (up - dn) / (2.0 * h);
}

// Relative error with an absolute floor of 1 in the denominator, so tiny
// gradients are compared absolutely.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Sign disagreement count straight off the real-valued embeddings
// (>= 0 counts as positive).
inline std::uint64_t sign_mismatches(const Vec& a, const Vec& b) {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] >= 0.0;
    const bool pb = b[i] >= 0.0;
    if (pa != pb) ++n;
  }
  return n;
}

struct Hit {
  std::int64_t id = 0;
  double dist = 0.0;
};

// Exhaustive top-z by (distance, id), optionally excluding one id.
inline std::vector<Hit> topz(
    const std::vector<Vec>& corpus, const std::vector<std::int64_t>& ids,
    const Vec& query, std::size_t z,
    const std::function<double(const Vec&, const Vec&)>& dist,
    std::optional<std::int64_t> exclude = std::nullopt) {
  std::vector<Hit> all;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (exclude && ids[i] == *exclude) continue;
    all.push_back({ids[i], dist(query, corpus[i])});
  }
  std::sort(all.begin(), all.end(), [](const Hit& x, const Hit& y) {
    if (x.dist != y.dist) return x.dist < y.dist;
    return x.id < y.id;
  });
  if (all.size() > z) all.resize(z);
  return all;
}

inline double precision(const std::vector<int>& rel) {
  double hits = 0.0;
  for (const int r : rel) hits += r ? 1.0 : 0.0;
  return hits / static_cast<double>(rel.size());
}

inline double ap_standard(const std::vector<int>& rel) {
  double sum = 0.0;
  int hits = 0;
  for (std::size_t z = 0; z < rel.size(); ++z) {
    if (!rel[z]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(z + 1);
  }
  return hits == 0 ? 0.0 : sum / hits;
}

inline double ap_as_written(const std::vector<int>& rel) {
  double sum = 0.0;
  for (std::size_t z = 0; z < rel.size(); ++z)
    if (rel[z]) sum += 1.0 / static_cast<double>(z + 1);
  return sum / static_cast<double>(rel.size());
}

// Accuracy of classifying each point by its nearest class centroid.
inline double centroid_accuracy(const std::vector<Vec>& points,
                                const std::vector<std::int32_t>& labels,
                                std::size_t num_classes) {
  const std::size_t d = points.front().size();
  std::vector<Vec> centroid(num_classes, Vec(d, 0.0));
  std::vector<std::size_t> count(num_classes, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k)
      centroid[labels[i]][k] += points[i][k];
    ++count[labels[i]];
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    for (std::size_t k = 0; k < d; ++k)
      centroid[c][k] /= static_cast<double>(count[c]);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::size_t best = 0;
    double best_d = euclid_f(points[i], centroid[0]);
    for (std::size_t c = 1; c < num_classes; ++c) {
      const double dc = euclid_f(points[i], centroid[c]);
      if (dc < best_d) {
        best_d = dc;
        best = c;
      }
    }
    if (best == static_cast<std::size_t>(labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(points.size());
}

}  // namespace oracle
