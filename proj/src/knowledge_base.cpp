#include "evidencedesk/knowledge_base.hpp"

#include "evidencedesk/error.hpp"

#include <algorithm>

namespace evidencedesk::pipeline {

KnowledgeBase KnowledgeBase::open(const std::filesystem::path& store_dir,
                                  const std::filesystem::path& index_path,
                                  std::span<const std::filesystem::path> adapter_files) {
  KnowledgeBase kb;
  kb.corpus = std::make_shared<const corpus::CorpusStore>(corpus::CorpusStore::load(store_dir));
  kb.index = std::make_shared<const index::VectorIndex>(index::VectorIndex::load(index_path));
  for (const auto& key : kb.index->partitions()) {
    if (!kb.providers.contains(key.model_id)) {
      kb.providers.emplace(key.model_id, embed::make_provider(key.model_id));
    }
  }
  for (const auto& file : adapter_files) {
    auto adapter = embed::load_adapter(file);
    kb.adapters[adapter.model_id] = std::move(adapter);
  }
  kb.check();
  return kb;
}

void KnowledgeBase::check() const {
  if (!corpus || !index) {
    throw Error(ErrorCode::kInvalidArgument, "knowledge base needs a corpus and an index");
  }
  for (const auto& key : index->partitions()) {
    auto it = providers.find(key.model_id);
    if (it == providers.end()) {
      throw Error(ErrorCode::kNotFound, "no embedding provider for model '" + key.model_id + "'");
    }
    if (it->second->dims() != index->partition(key)->dims) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "provider for '" + key.model_id + "' does not match the index dimension");
    }
  }
  for (const auto& [model, adapter] : adapters) {
    auto it = providers.find(model);
    if (it == providers.end()) {
      throw Error(ErrorCode::kNotFound, "adapter for unknown model '" + model + "'");
    }
    if (it->second->dims() != adapter.d) {
      throw Error(ErrorCode::kDimensionMismatch, "adapter for '" + model + "' has wrong dimension");
    }
  }
}

index::VectorIndex build_index(
    const corpus::CorpusStore& store,
    std::span<const std::shared_ptr<const embed::EmbeddingProvider>> providers,
    std::span<const int> scales, IndexBuildReport* report) {
  std::vector<index::IndexEntry> entries;
  std::size_t skipped = 0;
  for (const auto& provider : providers) {
    for (const auto& chunk : store.chunks()) {
      if (!scales.empty() &&
          std::find(scales.begin(), scales.end(), chunk.scale) == scales.end()) {
        continue;
      }
      if (chunk.text.empty()) {
        ++skipped;
        continue;
      }
      embed::EmbeddingVector v;
      try {
        v = embed::normalize(provider->embed(chunk.text));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kZeroVector && e.code() != ErrorCode::kInvalidArgument) throw;
        ++skipped;
        continue;
      }
      entries.push_back({chunk.chunk_id, provider->model_id(), chunk.scale, std::move(v)});
    }
  }
  index::VectorIndex idx;
  idx.add(entries);
  if (report) *report = {entries.size(), skipped};
  return idx;
}

}  // namespace evidencedesk::pipeline
