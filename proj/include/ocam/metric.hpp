#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace ocam {

using Vec = std::vector<double>;

enum class Metric { cosine, euclidean };

const char* to_string(Metric m);
Metric metric_from_string(std::string_view s);

// Sign hash code over {-1, +1}. Entry i is +1 iff embedding coordinate i
// is >= 0 (zero maps to +1).
struct HashCode {
  std::vector<std::int8_t> bits;

  std::size_t size() const { return bits.size(); }
};

// Hash code packed into 64-bit words, little-endian within the stream:
// code entry i lives at bit (i % 64) of word (i / 64) and is set iff the
// entry is +1. Trailing bits of the last word are zero, which pairwise
// XOR relies on.
struct PackedCode {
  std::uint32_t length = 0;
  std::vector<std::uint64_t> words;
};

// (1 - cos(u, v)) / 2, clamped into [0, 1] against rounding. Throws
// DomainError if either vector has zero norm.
double cosine_distance(std::span<const double> u, std::span<const double> v);

// L2 norm of (u - v).
double euclidean_distance(std::span<const double> u, std::span<const double> v);

double distance(Metric metric, std::span<const double> u,
                std::span<const double> v);

// Distance value plus its partial derivatives with respect to both
// inputs. For euclidean at coincident points the subgradient zero is
// used.
struct PairDistanceGrad {
  double value = 0.0;
  Vec d_lhs;
  Vec d_rhs;
};

PairDistanceGrad cosine_distance_grad(std::span<const double> u,
                                      std::span<const double> v);
PairDistanceGrad euclidean_distance_grad(std::span<const double> u,
                                         std::span<const double> v);
PairDistanceGrad distance_grad(Metric metric, std::span<const double> u,
                               std::span<const double> v);

HashCode binarize(std::span<const double> embedding);

// Naive positionwise disagreement count.
std::uint64_t hamming_distance(const HashCode& a, const HashCode& b);

PackedCode pack(const HashCode& code);

// XOR + popcount over packed words. Equals the naive count exactly.
std::uint64_t hamming_distance(const PackedCode& a, const PackedCode& b);

}  // namespace ocam
