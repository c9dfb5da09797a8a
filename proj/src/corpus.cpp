#include "evidencedesk/corpus.hpp"

#include "evidencedesk/error.hpp"
#include "evidencedesk/text_util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace evidencedesk::corpus {

using nlohmann::json;

std::vector<std::string> tokenize_proxy(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

std::string make_chunk_id(std::string_view doc_id, int scale,
                          std::size_t start_token) {
  std::ostringstream os;
  os << doc_id << "#s" << scale << "@" << start_token;
  return os.str();
}

std::vector<TokenWindow> plan_windows(std::size_t n_tokens, int scale,
                                      double overlap_fraction) {
  if (scale <= 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "chunk scale must be positive, got " + std::to_string(scale));
  }
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "overlap_fraction must lie in [0, 1)");
  }
  std::vector<TokenWindow> windows;
  if (n_tokens == 0) return windows;

  const auto s = static_cast<std::size_t>(scale);
  const auto stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(scale * (1.0 - overlap_fraction))));
  for (std::size_t start = 0; start + s < n_tokens; start += stride) {
    windows.push_back({start, start + s});
  }
  windows.push_back({n_tokens > s ? n_tokens - s : 0, n_tokens});
  return windows;
}

std::vector<Chunk> chunk_multiscale(const Document& doc,
                                    std::span<const int> scales,
                                    double overlap_fraction,
                                    const Tokenizer& tokenizer) {
  if (scales.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "at least one scale is required");
  }
  for (int s : scales) {
    if (s <= 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "chunk scale must be positive, got " + std::to_string(s));
    }
  }
  if (doc.doc_id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "document has an empty doc_id");
  }
  const auto tokens = tokenizer(doc.body);

  std::set<int> unique_scales(scales.begin(), scales.end());
  std::vector<Chunk> chunks;
  for (int scale : unique_scales) {
    for (const auto& w : plan_windows(tokens.size(), scale, overlap_fraction)) {
      Chunk c;
      c.chunk_id = make_chunk_id(doc.doc_id, scale, w.start);
      c.doc_id = doc.doc_id;
      c.scale = scale;
      c.start_token = w.start;
      c.end_token = w.end;
      std::vector<std::string> window(tokens.begin() + w.start,
                                      tokens.begin() + w.end);
      c.text = util::join(window, " ");
      chunks.push_back(std::move(c));
    }
  }
  return chunks;
}

std::size_t IngestReport::total_chunks() const {
  std::size_t total = 0;
  for (const auto& [scale, n] : chunks_per_scale) total += n;
  return total;
}

void CorpusStore::add_document(const Document& doc, std::span<const int> scales,
                               double overlap_fraction) {
  if (doc_pos_.contains(doc.doc_id)) {
    throw Error(ErrorCode::kDuplicateKey,
                "duplicate doc_id '" + doc.doc_id + "'");
  }
  if (!doc.allow_empty_body && tokenize_proxy(doc.body).empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "document '" + doc.doc_id + "' has an empty body");
  }
  auto chunks = chunk_multiscale(doc, scales, overlap_fraction);
  doc_pos_.emplace(doc.doc_id, documents_.size());
  documents_.push_back({doc.doc_id, doc.title, doc.source_ref});
  const std::size_t first = chunks_.size();
  std::move(chunks.begin(), chunks.end(), std::back_inserter(chunks_));
  index_last_chunks(first);
}

void CorpusStore::index_last_chunks(std::size_t first) {
  for (std::size_t i = first; i < chunks_.size(); ++i) {
    chunk_pos_.emplace(chunks_[i].chunk_id, i);
  }
}

const Chunk* CorpusStore::find_chunk(std::string_view chunk_id) const {
  auto it = chunk_pos_.find(std::string(chunk_id));
  return it == chunk_pos_.end() ? nullptr : &chunks_[it->second];
}

const DocumentInfo* CorpusStore::find_document(std::string_view doc_id) const {
  auto it = doc_pos_.find(std::string(doc_id));
  return it == doc_pos_.end() ? nullptr : &documents_[it->second];
}

std::string CorpusStore::source_ref_for_chunk(std::string_view chunk_id) const {
  const Chunk* c = find_chunk(chunk_id);
  if (!c) return {};
  const DocumentInfo* d = find_document(c->doc_id);
  return d ? d->source_ref : std::string{};
}

IngestReport CorpusStore::report() const {
  IngestReport r;
  r.documents = documents_.size();
  for (const auto& c : chunks_) ++r.chunks_per_scale[c.scale];
  return r;
}

void CorpusStore::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.jsonl", std::ios::binary);
  std::ofstream chunks(dir / "chunks.jsonl", std::ios::binary);
  if (!manifest || !chunks) {
    throw Error(ErrorCode::kIo, "cannot write corpus store at " + dir.string());
  }
  for (const auto& d : documents_) {
    manifest << json{{"doc_id", d.doc_id},
                     {"title", d.title},
                     {"source_ref", d.source_ref}}
                    .dump()
             << '\n';
  }
  for (const auto& c : chunks_) {
    chunks << json{{"chunk_id", c.chunk_id},   {"doc_id", c.doc_id},
                   {"scale", c.scale},         {"start_token", c.start_token},
                   {"end_token", c.end_token}, {"text", c.text}}
                  .dump()
           << '\n';
  }
}

namespace {

template <typename Fn>
void for_each_jsonl(const std::filesystem::path& file, Fn&& fn) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + file.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, file.string() + ":" +
                                         std::to_string(lineno) + ": " +
                                         e.what());
    }
  }
}

}  // namespace

CorpusStore CorpusStore::load(const std::filesystem::path& dir) {
  CorpusStore store;
  for_each_jsonl(dir / "manifest.jsonl", [&](const json& j) {
    DocumentInfo d{j.at("doc_id").get<std::string>(),
                   j.at("title").get<std::string>(),
                   j.at("source_ref").get<std::string>()};
    if (store.doc_pos_.contains(d.doc_id)) {
      throw Error(ErrorCode::kDuplicateKey, "duplicate doc_id '" + d.doc_id + "'");
    }
    store.doc_pos_.emplace(d.doc_id, store.documents_.size());
    store.documents_.push_back(std::move(d));
  });
  for_each_jsonl(dir / "chunks.jsonl", [&](const json& j) {
    Chunk c;
    c.chunk_id = j.at("chunk_id").get<std::string>();
    c.doc_id = j.at("doc_id").get<std::string>();
    c.scale = j.at("scale").get<int>();
    c.start_token = j.at("start_token").get<std::size_t>();
    c.end_token = j.at("end_token").get<std::size_t>();
    c.text = j.at("text").get<std::string>();
    if (store.chunk_pos_.contains(c.chunk_id)) {
      throw Error(ErrorCode::kDuplicateKey,
                  "duplicate chunk_id '" + c.chunk_id + "'");
    }
    store.chunk_pos_.emplace(c.chunk_id, store.chunks_.size());
    store.chunks_.push_back(std::move(c));
  });
  return store;
}

Document read_document(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();

  Document doc;
  doc.doc_id = file.stem().string();
  doc.title = doc.doc_id;
  doc.source_ref = file.filename().string();

  // Optional header block: "Key: value" lines up to the first blank line.
  auto lines = util::split_lines(content);
  std::size_t body_start = 0;
  bool saw_header = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = util::trim(lines[i]);
    if (line.empty()) {
      if (saw_header) body_start = i + 1;
      break;
    }
    auto colon = line.find(':');
    if (colon == std::string_view::npos) break;
    std::string key = util::to_lower(util::trim(line.substr(0, colon)));
    std::string value(util::trim(line.substr(colon + 1)));
    if (key == "title") {
      doc.title = value;
    } else if (key == "source") {
      doc.source_ref = value;
    } else {
      break;
    }
    doc.metadata[key] = value;
    saw_header = true;
    body_start = i + 1;
  }
  std::vector<std::string> body(lines.begin() + static_cast<long>(body_start),
                                lines.end());
  doc.body = util::join(body, "\n");
  doc.allow_empty_body = tokenize_proxy(doc.body).empty();
  return doc;
}

CorpusStore ingest_directory(const std::filesystem::path& input_dir,
                             std::span<const int> scales,
                             double overlap_fraction,
                             const std::filesystem::path& store_dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(input_dir, ec)) {
    throw Error(ErrorCode::kIo,
                "cannot read input directory " + input_dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (std::filesystem::recursive_directory_iterator it(input_dir, ec), end;
       it != end; it.increment(ec)) {
    if (ec) throw Error(ErrorCode::kIo, ec.message());
    if (!it->is_regular_file()) continue;
    if (it->path().filename().string().starts_with(".")) continue;
    files.push_back(it->path());
  }
  if (ec) throw Error(ErrorCode::kIo, ec.message());
  std::sort(files.begin(), files.end());

  CorpusStore store;
  for (const auto& f : files) {
    store.add_document(read_document(f), scales, overlap_fraction);
  }
  if (!store_dir.empty()) store.save(store_dir);
  return store;
}

}  // namespace evidencedesk::corpus
