#include "ocam/index.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "ocam/error.hpp"

namespace ocam {

namespace {

constexpr char kMagic[8] = {'O', 'C', 'A', 'M', 'I', 'D', 'X', '1'};
constexpr std::uint32_t kVersion = 1;
// Spaces answerable by any snapshot, recorded in the header.
constexpr std::uint32_t kSpaceFlags = 0b111;  // euclidean | hamming | cosine

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void read_raw(std::ifstream& in, T& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw UsageError(path + ": truncated index file");
}

}  // namespace

const char* to_string(Space s) {
  switch (s) {
    case Space::euclidean: return "euclidean";
    case Space::hamming: return "hamming";
    case Space::cosine: return "cosine";
  }
  throw UsageError("unknown space value");
}

Space space_from_string(std::string_view s) {
  if (s == "euclidean") return Space::euclidean;
  if (s == "hamming") return Space::hamming;
  if (s == "cosine") return Space::cosine;
  throw UsageError("unknown space: '" + std::string(s) + "'");
}

RetrievalIndex build_index(std::vector<Vec> embeddings,
                           std::vector<std::int32_t> labels,
                           std::vector<std::int64_t> ids) {
  if (embeddings.empty()) throw UsageError("build_index: empty corpus");
  if (labels.size() != embeddings.size() || ids.size() != embeddings.size())
    throw UsageError("build_index: parallel arrays differ in length");
  const std::size_t dim = embeddings[0].size();
  if (dim == 0) throw UsageError("build_index: zero-dimensional embeddings");
  for (const Vec& e : embeddings)
    if (e.size() != dim) throw UsageError("build_index: ragged embeddings");
  std::unordered_set<std::int64_t> seen;
  for (const std::int64_t id : ids)
    if (!seen.insert(id).second)
      throw UsageError("build_index: duplicate id " + std::to_string(id));

  RetrievalIndex ix;
  ix.embeddings = std::move(embeddings);
  ix.labels = std::move(labels);
  ix.ids = std::move(ids);
  ix.codes.reserve(ix.embeddings.size());
  ix.packed.reserve(ix.embeddings.size());
  for (const Vec& e : ix.embeddings) {
    ix.codes.push_back(binarize(e));
    ix.packed.push_back(pack(ix.codes.back()));
  }
  return ix;
}

RetrievalResult query_topz(const RetrievalIndex& ix,
                           std::span<const double> query, std::size_t z,
                           Space space,
                           std::optional<std::int64_t> exclude_id) {
  if (z == 0) throw UsageError("query_topz: z must be >= 1");
  if (ix.size() == 0) throw UsageError("query_topz: empty index");
  if (query.size() != ix.dim())
    throw UsageError("query_topz: query length does not match index dim");

  struct Entry {
    double distance;
    std::int64_t id;
    std::size_t slot;
  };
  std::vector<Entry> entries;
  entries.reserve(ix.size());

  if (space == Space::hamming) {
    const PackedCode q = pack(binarize(query));
    for (std::size_t i = 0; i < ix.size(); ++i) {
      if (exclude_id && ix.ids[i] == *exclude_id) continue;
      entries.push_back({static_cast<double>(hamming_distance(q, ix.packed[i])),
                         ix.ids[i], i});
    }
  } else {
    const Metric metric =
        space == Space::euclidean ? Metric::euclidean : Metric::cosine;
    for (std::size_t i = 0; i < ix.size(); ++i) {
      if (exclude_id && ix.ids[i] == *exclude_id) continue;
      entries.push_back({distance(metric, query, ix.embeddings[i]),
                         ix.ids[i], i});
    }
  }

  const std::size_t take = std::min(z, entries.size());
  const auto by_distance_then_id = [](const Entry& a, const Entry& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
  };
  std::partial_sort(entries.begin(), entries.begin() + take, entries.end(),
                    by_distance_then_id);

  RetrievalResult out;
  out.space = space;
  out.items.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    out.items.push_back({entries[i].id, entries[i].distance});
  return out;
}

void save_index(const RetrievalIndex& ix, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError(path + ": cannot open for writing");
  out.write(kMagic, sizeof kMagic);
  write_raw(out, kVersion);
  write_raw(out, static_cast<std::uint64_t>(ix.size()));
  write_raw(out, static_cast<std::uint64_t>(ix.dim()));
  write_raw(out, kSpaceFlags);
  for (const Vec& e : ix.embeddings)
    out.write(reinterpret_cast<const char*>(e.data()),
              static_cast<std::streamsize>(e.size() * sizeof(double)));
  for (const PackedCode& p : ix.packed)
    out.write(reinterpret_cast<const char*>(p.words.data()),
              static_cast<std::streamsize>(p.words.size() * sizeof(std::uint64_t)));
  out.write(reinterpret_cast<const char*>(ix.labels.data()),
            static_cast<std::streamsize>(ix.labels.size() * sizeof(std::int32_t)));
  out.write(reinterpret_cast<const char*>(ix.ids.data()),
            static_cast<std::streamsize>(ix.ids.size() * sizeof(std::int64_t)));
  if (!out) throw UsageError(path + ": write failed");
}

RetrievalIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(path + ": cannot open");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw UsageError(path + ": not an index file");
  std::uint32_t version = 0;
  read_raw(in, version, path);
  if (version != kVersion)
    throw UsageError(path + ": unsupported index version " +
                     std::to_string(version));
  std::uint64_t m = 0, dim = 0;
  std::uint32_t flags = 0;
  read_raw(in, m, path);
  read_raw(in, dim, path);
  read_raw(in, flags, path);
  if (m == 0 || dim == 0) throw UsageError(path + ": degenerate index header");

  std::vector<Vec> embeddings(m, Vec(dim));
  for (Vec& e : embeddings) {
    in.read(reinterpret_cast<char*>(e.data()),
            static_cast<std::streamsize>(dim * sizeof(double)));
    if (!in) throw UsageError(path + ": truncated index file");
  }
  const std::size_t words = (dim + 63) / 64;
  std::vector<std::vector<std::uint64_t>> packed(m,
                                                 std::vector<std::uint64_t>(words));
  for (auto& p : packed) {
    in.read(reinterpret_cast<char*>(p.data()),
            static_cast<std::streamsize>(words * sizeof(std::uint64_t)));
    if (!in) throw UsageError(path + ": truncated index file");
  }
  std::vector<std::int32_t> labels(m);
  in.read(reinterpret_cast<char*>(labels.data()),
          static_cast<std::streamsize>(m * sizeof(std::int32_t)));
  std::vector<std::int64_t> ids(m);
  in.read(reinterpret_cast<char*>(ids.data()),
          static_cast<std::streamsize>(m * sizeof(std::int64_t)));
  if (!in) throw UsageError(path + ": truncated index file");

  RetrievalIndex ix = build_index(std::move(embeddings), std::move(labels),
                                  std::move(ids));
  // Stored codes must match recomputation; a mismatch means the file is
  // corrupt or was produced by something else.
  for (std::size_t i = 0; i < ix.size(); ++i)
    if (ix.packed[i].words != packed[i])
      throw UsageError(path + ": stored code " + std::to_string(i) +
                       " does not match its embedding");
  return ix;
}

}  // namespace ocam
