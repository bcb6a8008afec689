#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ocam/metric.hpp"

namespace ocam {

enum class Space { euclidean, hamming, cosine };

const char* to_string(Space s);
Space space_from_string(std::string_view s);

// Immutable retrieval corpus: embeddings, their sign hash codes
// (precomputed, packed for the scan), labels and stable ids. Concurrent
// read-only queries are safe.
struct RetrievalIndex {
  std::vector<Vec> embeddings;
  std::vector<HashCode> codes;
  std::vector<PackedCode> packed;
  std::vector<std::int32_t> labels;
  std::vector<std::int64_t> ids;

  std::size_t size() const { return embeddings.size(); }
  std::size_t dim() const {
    return embeddings.empty() ? 0 : embeddings[0].size();
  }
};

RetrievalIndex build_index(std::vector<Vec> embeddings,
                           std::vector<std::int32_t> labels,
                           std::vector<std::int64_t> ids);

struct RankedItem {
  std::int64_t id = 0;
  double distance = 0.0;
};

struct RetrievalResult {
  Space space = Space::euclidean;
  std::vector<RankedItem> items;  // nondecreasing distance, ties by id
};

// Exact full scan. Hamming space binarizes the query and ranks by packed
// popcount; euclidean/cosine rank on the raw embeddings. exclude_id, when
// set, never appears in the result. Fewer than Z candidates returns them
// all.
RetrievalResult query_topz(const RetrievalIndex& ix,
                           std::span<const double> query, std::size_t z,
                           Space space,
                           std::optional<std::int64_t> exclude_id = {});

// Little-endian binary snapshot; load/save round-trips bit-exactly.
void save_index(const RetrievalIndex& ix, const std::string& path);
RetrievalIndex load_index(const std::string& path);

}  // namespace ocam
