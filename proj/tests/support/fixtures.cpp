#include "fixtures.hpp"

#include "evidencedesk/corpus.hpp"
#include "evidencedesk/embed.hpp"
#include "evidencedesk/index.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace edtest {

namespace ed = evidencedesk;

std::filesystem::path data_dir() { return EVIDENCEDESK_TEST_DATA; }
std::filesystem::path golden_dir() { return data_dir() / "golden"; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("evidencedesk-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

namespace {

std::vector<std::shared_ptr<const ed::embed::EmbeddingProvider>> golden_providers() {
  std::vector<std::shared_ptr<const ed::embed::EmbeddingProvider>> out;
  std::stringstream ss(kGoldenModels);
  std::string id;
  while (std::getline(ss, id, ',')) out.push_back(ed::embed::make_provider(id));
  return out;
}

}  // namespace

ed::pipeline::KnowledgeBase golden_kb() {
  auto store = std::make_shared<ed::corpus::CorpusStore>(ed::corpus::ingest_directory(
      golden_dir() / "corpus", ed::corpus::kDefaultScales, ed::corpus::kDefaultOverlap));
  const auto providers = golden_providers();
  ed::pipeline::KnowledgeBase kb;
  kb.index = std::make_shared<ed::index::VectorIndex>(ed::pipeline::build_index(*store, providers));
  kb.corpus = store;
  for (const auto& p : providers) kb.providers[p->model_id()] = p;
  kb.check();
  return kb;
}

void build_golden_on_disk(const std::filesystem::path& dir) {
  const auto store = ed::corpus::ingest_directory(
      golden_dir() / "corpus", ed::corpus::kDefaultScales, ed::corpus::kDefaultOverlap,
      dir / "store");
  ed::pipeline::build_index(store, golden_providers()).save(dir / "index.bin");
}

std::shared_ptr<ed::llm::ScriptedChatClient> golden_client(bool strict) {
  return std::make_shared<ed::llm::ScriptedChatClient>(
      ed::llm::load_transcript(golden_dir() / "transcript.jsonl", strict));
}

PlantedHyde planted_hyde() {
  PlantedHyde f;
  f.model_id = "hash:1024:7";
  f.scale = 128;
  f.question = "What is the first-line treatment for glimmer fever in adults?";
  f.passage = "Oral zentamycin taken for seven days clears glimmer fever infection and "
              "relieves symptoms quickly.";
  const std::vector<std::pair<std::string, std::string>> docs{
      {"distractor",
       "What is the first-line treatment for glimmer fever in adults? Clinicians often ask what "
       "the first-line treatment for glimmer fever is."},
      {"planted",
       "Oral zentamycin taken for seven days clears glimmer fever infection in adults and "
       "relieves symptoms quickly."},
      {"filler-storage",
       "Oral zentamycin suspension taken from the bottle stays stable for seven days and "
       "should be kept cold."},
      {"filler-dosing",
       "Zentamycin tablets are taken with food; symptoms of nausea settle quickly after seven "
       "days."},
      {"filler-cardiology",
       "Beta blockers lower heart rate and reduce angina during exertion in stable coronary "
       "disease."},
      {"filler-renal",
       "Chronic kidney disease is staged by estimated glomerular filtration rate and "
       "albuminuria."},
  };
  auto store = std::make_shared<ed::corpus::CorpusStore>();
  const std::vector<int> scales{f.scale};
  for (const auto& [id, text] : docs) {
    ed::corpus::Document doc;
    doc.doc_id = id;
    doc.title = id;
    doc.source_ref = id + ".txt";
    doc.body = text;
    store->add_document(doc, scales, 0.0);
  }
  for (const auto& c : store->chunks()) {
    f.chunk_ids.push_back(c.chunk_id);
    f.chunk_texts.push_back(c.text);
  }
  f.planted_chunk = ed::corpus::make_chunk_id("planted", f.scale, 0);
  f.distractor_chunk = ed::corpus::make_chunk_id("distractor", f.scale, 0);

  auto provider = ed::embed::make_provider(f.model_id);
  f.kb.corpus = store;
  f.kb.index = std::make_shared<ed::index::VectorIndex>(
      ed::pipeline::build_index(*store, {&provider, 1}));
  f.kb.providers[f.model_id] = provider;

  f.config.models = {f.model_id};
  f.config.scales = {f.scale};
  f.config.k_per_partition = 3;
  f.config.k_context = 3;
  f.config.use_adapter = false;
  f.transcript.entries = {{"hyde", "glimmer fever", f.passage}};
  f.transcript.strict = false;
  return f;
}

std::vector<std::string> brute_force_ranking(const ed::pipeline::KnowledgeBase& kb,
                                             const std::string& model, const std::string& text,
                                             const std::vector<std::string>& chunk_ids) {
  const auto& provider = *kb.providers.at(model);
  const auto q = provider.embed(text).values;
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& id : chunk_ids) {
    const auto v = provider.embed(kb.corpus->find_chunk(id)->text).values;
    double dot = 0, nq = 0, nv = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      dot += q[i] * v[i];
      nq += q[i] * q[i];
      nv += v[i] * v[i];
    }
    scored.emplace_back(dot / std::sqrt(nq * nv), id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (const auto& s : scored) out.push_back(s.second);
  return out;
}

void FakeTransport::push_response(int status, std::string body) {
  std::lock_guard lock(mu_);
  queue_.push_back({ed::net::HttpResponse{status, std::move(body)}, ed::ErrorCode::kTransport});
}

void FakeTransport::push_error(ed::ErrorCode code) {
  std::lock_guard lock(mu_);
  queue_.push_back({std::nullopt, code});
}

void FakeTransport::set_default(int status, std::string body) {
  std::lock_guard lock(mu_);
  default_ = ed::net::HttpResponse{status, std::move(body)};
}

ed::net::HttpResponse FakeTransport::post_json(const std::string& path, const std::string& body,
                                               const ed::net::Headers& headers,
                                               std::chrono::milliseconds) {
  std::lock_guard lock(mu_);
  requests_.push_back({path, body, headers});
  if (queue_.empty()) {
    if (default_) return *default_;
    throw ed::Error(ed::ErrorCode::kTransport, "connection refused");
  }
  auto next = queue_.front();
  queue_.pop_front();
  if (next.response) return *next.response;
  throw ed::Error(next.error, "scripted failure");
}

std::size_t FakeTransport::requests_sent() const {
  std::lock_guard lock(mu_);
  return requests_.size();
}

std::vector<FakeTransport::Request> FakeTransport::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

ed::net::RetryPolicy fast_retry(int max_retries) {
  ed::net::RetryPolicy p;
  p.max_retries = max_retries;
  p.initial_backoff = std::chrono::milliseconds(0);
  p.max_backoff = std::chrono::milliseconds(0);
  p.attempt_timeout = std::chrono::milliseconds(1000);
  return p;
}

}  // namespace edtest
