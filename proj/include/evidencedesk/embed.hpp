#pragma once

#include "evidencedesk/http_transport.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evidencedesk::embed {

struct EmbeddingVector {
  std::string model_id;
  std::vector<double> values;
  bool normalized = false;

  std::size_t dims() const { return values.size(); }
};

double norm(std::span<const double> v);

/// v / |v| with normalized = true. Throws kZeroVector for a zero or
/// non-finite norm.
EmbeddingVector normalize(const EmbeddingVector& v);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual const std::string& model_id() const = 0;
  virtual std::size_t dims() const = 0;
  /// Must be safe to call concurrently.
  virtual EmbeddingVector embed(std::string_view text) const = 0;
};

/// Deterministic feature-hashing embedder. Each lower-cased, punctuation
/// trimmed token (weight 1) and adjacent token pair (weight 0.5) is hashed,
/// with the seed mixed into the hash basis, to a signed coordinate. The
/// output is not normalized.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  HashingEmbedder(std::string model_id, std::size_t dims, std::uint64_t seed);

  const std::string& model_id() const override { return model_id_; }
  std::size_t dims() const override { return dims_; }
  EmbeddingVector embed(std::string_view text) const override;

 private:
  std::string model_id_;
  std::size_t dims_;
  std::uint64_t basis_;
};

/// OpenAI-compatible /embeddings client: POST {model, input}, vector read from
/// data[0].embedding.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  RemoteEmbedder(std::string model_id, std::string remote_model,
                 std::size_t dims, std::shared_ptr<net::HttpTransport> transport,
                 std::string api_key, net::RetryPolicy policy = {});

  const std::string& model_id() const override { return model_id_; }
  std::size_t dims() const override { return dims_; }
  EmbeddingVector embed(std::string_view text) const override;

 private:
  std::string model_id_;
  std::string remote_model_;
  std::size_t dims_;
  std::shared_ptr<net::HttpTransport> transport_;
  std::string api_key_;
  net::RetryPolicy policy_;
};

/// Builds a provider from its model id:
///   hash:<dims>[:<seed>]          HashingEmbedder (seed defaults to 0)
///   openai:<remote-model>:<dims>  RemoteEmbedder against
///                                 EVIDENCEDESK_LLM_BASE_URL / _API_KEY
std::shared_ptr<const EmbeddingProvider> make_provider(const std::string& model_id);

/// Square linear map applied to query embeddings of one model.
struct AdapterMatrix {
  std::string model_id;
  std::size_t d = 0;
  double lambda = 1.0;
  std::size_t trained_pairs = 0;
  std::vector<double> weights;  // row-major d x d

  double at(std::size_t row, std::size_t col) const { return weights[row * d + col]; }

  static AdapterMatrix identity(std::string model_id, std::size_t d, double lambda);
};

struct TrainingPair {
  std::vector<double> query;
  std::vector<double> target;
};

/// Ridge regression toward the identity:
///   argmin_W  sum_i |W q_i - t_i|^2 + lambda |W - I|_F^2
///   W = (T Q^T + lambda I)(Q Q^T + lambda I)^-1
/// With no pairs the result is I; `d` is required for that case.
AdapterMatrix train_adapter(const std::string& model_id,
                            std::span<const TrainingPair> pairs, double lambda,
                            std::size_t d = 0);

/// normalize(W v).
EmbeddingVector apply_adapter(const AdapterMatrix& adapter,
                              const EmbeddingVector& v);

std::vector<TrainingPair> load_training_pairs(const std::filesystem::path& path);
void save_adapter(const AdapterMatrix& adapter, const std::filesystem::path& path);
AdapterMatrix load_adapter(const std::filesystem::path& path);

}  // namespace evidencedesk::embed
