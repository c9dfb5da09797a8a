#pragma once

#include "evidencedesk/corpus.hpp"
#include "evidencedesk/embed.hpp"
#include "evidencedesk/index.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>

namespace evidencedesk::pipeline {

/// Everything retrieval needs: chunk text and provenance, the vector index,
/// one embedding provider per indexed model and optional query adapters.
struct KnowledgeBase {
  std::shared_ptr<const corpus::CorpusStore> corpus;
  std::shared_ptr<const index::VectorIndex> index;
  std::map<std::string, std::shared_ptr<const embed::EmbeddingProvider>> providers;
  std::map<std::string, embed::AdapterMatrix> adapters;

  /// Loads a corpus store and index, creates providers from the index's
  /// model ids with embed::make_provider and loads adapter files.
  static KnowledgeBase open(const std::filesystem::path& store_dir,
                            const std::filesystem::path& index_path,
                            std::span<const std::filesystem::path> adapter_files = {});

  /// Throws unless every index model has a provider of matching dimension and
  /// every adapter matches its provider.
  void check() const;
};

struct IndexBuildReport {
  std::size_t entries = 0;
  std::size_t skipped = 0;  // chunks whose embedding was the zero vector
};

/// Embeds every chunk (restricted to `scales` when non-empty) with every
/// provider and returns the populated index.
index::VectorIndex build_index(
    const corpus::CorpusStore& store,
    std::span<const std::shared_ptr<const embed::EmbeddingProvider>> providers,
    std::span<const int> scales = {}, IndexBuildReport* report = nullptr);

}  // namespace evidencedesk::pipeline
