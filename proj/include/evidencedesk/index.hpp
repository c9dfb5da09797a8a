#pragma once

#include "evidencedesk/embed.hpp"

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace evidencedesk::index {

struct IndexEntry {
  std::string chunk_id;
  std::string model_id;
  int scale = 0;
  embed::EmbeddingVector vector;
};

struct SearchHit {
  std::string chunk_id;
  double score = 0.0;
  std::string model_id;
  int scale = 0;
  int rank = 0;

  bool operator==(const SearchHit&) const = default;
};

struct PartitionKey {
  std::string model_id;
  int scale = 0;

  auto operator<=>(const PartitionKey&) const = default;
};

/// dot(a, b) / (|a| |b|), clamped to [-1, 1].
double cosine_similarity(std::span<const double> a, std::span<const double> b);

inline constexpr double kDefaultRrfK = 60.0;
inline constexpr std::uint32_t kIndexFormatVersion = 1;

/// Exact cosine index partitioned by (model, scale). Vectors are held as
/// 32-bit floats. Single writer, many readers: concurrent search is safe,
/// add/save need exclusive access.
class VectorIndex {
 public:
  struct Partition {
    std::size_t dims = 0;
    std::vector<std::string> chunk_ids;
    std::vector<float> data;  // row-major, one row per chunk
    std::vector<double> norms;
  };

  /// All-or-nothing insert. Rejects duplicate (chunk_id, model_id, scale)
  /// keys, unnormalized vectors and dimension changes within a partition.
  /// Returns the total entry count afterwards.
  std::size_t add(std::span<const IndexEntry> entries);

  /// Exact top-k by cosine, ties by ascending chunk_id. With no partition the
  /// scan covers every partition of query.model_id.
  std::vector<SearchHit> search_topk(const embed::EmbeddingVector& query,
                                     std::size_t k,
                                     const std::optional<PartitionKey>& partition =
                                         std::nullopt) const;

  std::vector<PartitionKey> partitions() const;
  const Partition* partition(const PartitionKey& key) const;
  std::size_t size() const { return size_; }

  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path);

 private:
  void scan(const PartitionKey& key, const Partition& p,
            std::span<const double> query, double query_norm,
            std::vector<SearchHit>& out) const;

  std::map<PartitionKey, Partition> partitions_;
  std::map<PartitionKey, std::unordered_set<std::string>> keys_;
  std::size_t size_ = 0;
};

/// Reciprocal-rank fusion: score(c) = sum over lists of 1 / (k_rrf + rank).
/// Output sorted by fused score descending, ties by ascending chunk_id,
/// truncated to k_out and re-ranked 1..n. Independent of list order: each
/// chunk's contributions are summed in ascending-rank order, and its
/// model_id/scale come from its best (rank, model_id) appearance.
std::vector<SearchHit> fuse_ranks(std::span<const std::vector<SearchHit>> lists,
                                  double k_rrf, std::size_t k_out);

}  // namespace evidencedesk::index
