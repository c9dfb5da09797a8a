#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace evidencedesk::corpus {

struct Document {
  std::string doc_id;
  std::string title;
  std::string source_ref;
  std::string body;
  std::map<std::string, std::string> metadata;
  // An empty body is rejected unless this is set.
  bool allow_empty_body = false;
};

/// A window of `scale` proxy tokens over one document.
struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  int scale = 0;
  std::size_t start_token = 0;
  std::size_t end_token = 0;
  std::string text;

  bool operator==(const Chunk&) const = default;
};

using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;

inline const std::vector<int> kDefaultScales{128, 512, 1024};
inline constexpr double kDefaultOverlap = 0.25;

/// Splits on runs of whitespace.
std::vector<std::string> tokenize_proxy(std::string_view text);

std::string make_chunk_id(std::string_view doc_id, int scale,
                          std::size_t start_token);

struct TokenWindow {
  std::size_t start = 0;
  std::size_t end = 0;
};

/// Window placement for one scale over n tokens. Windows start at multiples of
/// max(1, floor(scale * (1 - overlap))) while start + scale < n, followed by a
/// final window anchored at max(0, n - scale).
std::vector<TokenWindow> plan_windows(std::size_t n_tokens, int scale,
                                      double overlap_fraction);

std::vector<Chunk> chunk_multiscale(const Document& doc,
                                    std::span<const int> scales,
                                    double overlap_fraction,
                                    const Tokenizer& tokenizer = tokenize_proxy);

struct DocumentInfo {
  std::string doc_id;
  std::string title;
  std::string source_ref;
};

struct IngestReport {
  std::size_t documents = 0;
  std::map<int, std::size_t> chunks_per_scale;

  std::size_t total_chunks() const;
};

/// In-memory corpus: documents plus their chunks, persisted as
/// manifest.jsonl and chunks.jsonl inside a store directory.
class CorpusStore {
 public:
  /// Chunks `doc` and records it. Throws on duplicate doc_id.
  void add_document(const Document& doc, std::span<const int> scales,
                    double overlap_fraction);

  const std::vector<DocumentInfo>& documents() const { return documents_; }
  const std::vector<Chunk>& chunks() const { return chunks_; }

  const Chunk* find_chunk(std::string_view chunk_id) const;
  const DocumentInfo* find_document(std::string_view doc_id) const;
  /// source_ref of the document a chunk belongs to; empty when unknown.
  std::string source_ref_for_chunk(std::string_view chunk_id) const;

  IngestReport report() const;

  void save(const std::filesystem::path& dir) const;
  static CorpusStore load(const std::filesystem::path& dir);

 private:
  void index_last_chunks(std::size_t first);

  std::vector<DocumentInfo> documents_;
  std::vector<Chunk> chunks_;
  std::unordered_map<std::string, std::size_t> doc_pos_;
  std::unordered_map<std::string, std::size_t> chunk_pos_;
};

/// Reads a text file into a Document. doc_id is the file stem. Leading
/// "Title:" / "Source:" header lines, when present, fill title and source_ref
/// and are stripped from the body; otherwise title is the stem and source_ref
/// the file name.
Document read_document(const std::filesystem::path& file);

/// Reads every regular, non-hidden file under `input_dir` (sorted by path),
/// chunks it and, when `store_dir` is non-empty, persists the store there.
CorpusStore ingest_directory(const std::filesystem::path& input_dir,
                             std::span<const int> scales,
                             double overlap_fraction,
                             const std::filesystem::path& store_dir = {});

}  // namespace evidencedesk::corpus
