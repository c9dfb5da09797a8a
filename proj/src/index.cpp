#include "evidencedesk/index.hpp"

#include "evidencedesk/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <tuple>
#include <unordered_map>

namespace evidencedesk::index {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "cosine of " + std::to_string(a.size()) + "- and " +
                    std::to_string(b.size()) + "-dimensional vectors");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw Error(ErrorCode::kZeroVector, "cosine similarity of a zero vector");
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

namespace {

constexpr double kNormTolerance = 1e-6;

bool hit_order(const SearchHit& a, const SearchHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.chunk_id < b.chunk_id;
}

}  // namespace

std::size_t VectorIndex::add(std::span<const IndexEntry> entries) {
  std::map<PartitionKey, std::unordered_set<std::string>> batch_keys;
  std::map<PartitionKey, std::size_t> batch_dims;
  for (const auto& e : entries) {
    PartitionKey key{e.model_id, e.scale};
    if (e.scale <= 0) {
      throw Error(ErrorCode::kInvalidArgument, "entry '" + e.chunk_id + "' has non-positive scale");
    }
    if (e.vector.model_id != e.model_id) {
      throw Error(ErrorCode::kInvalidArgument,
                  "entry '" + e.chunk_id + "' vector belongs to model '" +
                      e.vector.model_id + "'");
    }
    const double n = embed::norm(e.vector.values);
    if (!e.vector.normalized || std::abs(n - 1.0) > kNormTolerance) {
      throw Error(ErrorCode::kUnnormalized,
                  "entry '" + e.chunk_id + "' vector is not normalized");
    }
    std::size_t dims = e.vector.dims();
    if (auto it = partitions_.find(key); it != partitions_.end()) {
      if (it->second.dims != dims) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "partition " + key.model_id + "/" + std::to_string(key.scale) +
                        " holds " + std::to_string(it->second.dims) + "-dim vectors");
      }
    }
    if (auto [it, fresh] = batch_dims.emplace(key, dims); !fresh && it->second != dims) {
      throw Error(ErrorCode::kDimensionMismatch, "mixed dimensions within a batch");
    }
    const bool existing = keys_.contains(key) && keys_.at(key).contains(e.chunk_id);
    if (existing || !batch_keys[key].insert(e.chunk_id).second) {
      throw Error(ErrorCode::kDuplicateKey,
                  "duplicate index key (" + e.chunk_id + ", " + e.model_id + ", " +
                      std::to_string(e.scale) + ")");
    }
  }

  for (const auto& e : entries) {
    PartitionKey key{e.model_id, e.scale};
    auto& p = partitions_[key];
    p.dims = e.vector.dims();
    p.chunk_ids.push_back(e.chunk_id);
    double sq = 0.0;
    for (double x : e.vector.values) {
      const float f = static_cast<float>(x);
      p.data.push_back(f);
      sq += static_cast<double>(f) * static_cast<double>(f);
    }
    p.norms.push_back(std::sqrt(sq));
    keys_[key].insert(e.chunk_id);
  }
  size_ += entries.size();
  return size_;
}

void VectorIndex::scan(const PartitionKey& key, const Partition& p,
                       std::span<const double> query, double query_norm,
                       std::vector<SearchHit>& out) const {
  for (std::size_t row = 0; row < p.chunk_ids.size(); ++row) {
    const float* v = p.data.data() + row * p.dims;
    double dot = 0.0;
    for (std::size_t i = 0; i < p.dims; ++i) dot += query[i] * static_cast<double>(v[i]);
    double score = 0.0;
    if (p.norms[row] > 0.0) {
      score = std::clamp(dot / (query_norm * p.norms[row]), -1.0, 1.0);
    }
    out.push_back({p.chunk_ids[row], score, key.model_id, key.scale, 0});
  }
}

std::vector<SearchHit> VectorIndex::search_topk(
    const embed::EmbeddingVector& query, std::size_t k,
    const std::optional<PartitionKey>& partition) const {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  const double qn = embed::norm(query.values);
  if (!(qn > 0.0)) throw Error(ErrorCode::kZeroVector, "zero query vector");

  std::vector<std::pair<PartitionKey, const Partition*>> targets;
  if (partition) {
    auto it = partitions_.find(*partition);
    if (it == partitions_.end()) {
      throw Error(ErrorCode::kNotFound, "unknown partition " + partition->model_id +
                                            "/" + std::to_string(partition->scale));
    }
    targets.emplace_back(it->first, &it->second);
  } else {
    for (const auto& [key, p] : partitions_) {
      if (key.model_id == query.model_id) targets.emplace_back(key, &p);
    }
    if (targets.empty()) {
      throw Error(ErrorCode::kNotFound, "no partitions for model '" + query.model_id + "'");
    }
  }

  std::vector<SearchHit> hits;
  for (const auto& [key, p] : targets) {
    if (p->dims != query.dims()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "query has " + std::to_string(query.dims()) + " dims, partition " +
                      key.model_id + "/" + std::to_string(key.scale) + " has " +
                      std::to_string(p->dims));
    }
    scan(key, *p, query.values, qn, hits);
  }
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<long>(keep), hits.end(),
                    hit_order);
  hits.resize(keep);
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = static_cast<int>(i + 1);
  return hits;
}

std::vector<PartitionKey> VectorIndex::partitions() const {
  std::vector<PartitionKey> keys;
  for (const auto& [key, p] : partitions_) keys.push_back(key);
  return keys;
}

const VectorIndex::Partition* VectorIndex::partition(const PartitionKey& key) const {
  auto it = partitions_.find(key);
  return it == partitions_.end() ? nullptr : &it->second;
}

// File layout (all integers little-endian):
//   "EDVX" u32 version u32 partition_count
//   partition table: { str model_id, u32 scale, u32 dims, u64 count } *
//   records, partition by partition: { str chunk_id, f32[dims] } *
// where str is a u32 byte length followed by the bytes.
namespace {

constexpr char kMagic[4] = {'E', 'D', 'V', 'X'};

template <typename T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    v = to_le(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_str(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}
  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) corrupt("unexpected end of file");
    return to_le(v);
  }
  std::string get_str() {
    auto n = get<std::uint32_t>();
    if (n > (1u << 20)) corrupt("implausible string length");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) corrupt("unexpected end of file");
    return s;
  }
  [[noreturn]] void corrupt(const std::string& why) const {
    throw Error(ErrorCode::kCorruptFile, name_ + ": " + why);
  }

 private:
  std::istream& in_;
  std::string name_;
};

}  // namespace

void VectorIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  Writer w(out);
  out.write(kMagic, 4);
  w.put(kIndexFormatVersion);
  w.put(static_cast<std::uint32_t>(partitions_.size()));
  for (const auto& [key, p] : partitions_) {
    w.put_str(key.model_id);
    w.put(static_cast<std::uint32_t>(key.scale));
    w.put(static_cast<std::uint32_t>(p.dims));
    w.put(static_cast<std::uint64_t>(p.chunk_ids.size()));
  }
  for (const auto& [key, p] : partitions_) {
    for (std::size_t row = 0; row < p.chunk_ids.size(); ++row) {
      w.put_str(p.chunk_ids[row]);
      for (std::size_t i = 0; i < p.dims; ++i) w.put(p.data[row * p.dims + i]);
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  Reader r(in, path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) r.corrupt("not an index file");
  const auto version = r.get<std::uint32_t>();
  if (version != kIndexFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                path.string() + ": index format version " + std::to_string(version) +
                    ", expected " + std::to_string(kIndexFormatVersion));
  }
  const auto n_partitions = r.get<std::uint32_t>();
  std::vector<std::pair<PartitionKey, std::pair<std::uint32_t, std::uint64_t>>> table;
  for (std::uint32_t i = 0; i < n_partitions; ++i) {
    PartitionKey key;
    key.model_id = r.get_str();
    key.scale = static_cast<int>(r.get<std::uint32_t>());
    const auto dims = r.get<std::uint32_t>();
    const auto count = r.get<std::uint64_t>();
    if (dims == 0 || key.scale <= 0) r.corrupt("invalid partition header");
    table.push_back({key, {dims, count}});
  }

  VectorIndex index;
  for (const auto& [key, shape] : table) {
    auto& p = index.partitions_[key];
    auto& keys = index.keys_[key];
    p.dims = shape.first;
    for (std::uint64_t row = 0; row < shape.second; ++row) {
      auto id = r.get_str();
      if (!keys.insert(id).second) r.corrupt("duplicate chunk id '" + id + "'");
      double sq = 0.0;
      for (std::uint32_t i = 0; i < p.dims; ++i) {
        const float f = r.get<float>();
        if (!std::isfinite(f)) r.corrupt("non-finite vector component");
        p.data.push_back(f);
        sq += static_cast<double>(f) * static_cast<double>(f);
      }
      p.chunk_ids.push_back(std::move(id));
      p.norms.push_back(std::sqrt(sq));
      ++index.size_;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) r.corrupt("trailing bytes");
  return index;
}

std::vector<SearchHit> fuse_ranks(std::span<const std::vector<SearchHit>> lists,
                                  double k_rrf, std::size_t k_out) {
  struct Acc {
    std::vector<int> ranks;
    const SearchHit* best = nullptr;
  };
  std::unordered_map<std::string, Acc> acc;
  for (const auto& list : lists) {
    for (const auto& hit : list) {
      auto& a = acc[hit.chunk_id];
      a.ranks.push_back(hit.rank);
      if (!a.best || std::tie(hit.rank, hit.model_id, hit.scale) <
                         std::tie(a.best->rank, a.best->model_id, a.best->scale)) {
        a.best = &hit;
      }
    }
  }
  std::vector<SearchHit> fused;
  fused.reserve(acc.size());
  for (auto& [id, a] : acc) {
    std::sort(a.ranks.begin(), a.ranks.end());
    double score = 0.0;
    for (int r : a.ranks) score += 1.0 / (k_rrf + r);
    fused.push_back({id, score, a.best->model_id, a.best->scale, 0});
  }
  std::sort(fused.begin(), fused.end(), hit_order);
  if (fused.size() > k_out) fused.resize(k_out);
  for (std::size_t i = 0; i < fused.size(); ++i) fused[i].rank = static_cast<int>(i + 1);
  return fused;
}

}  // namespace evidencedesk::index
