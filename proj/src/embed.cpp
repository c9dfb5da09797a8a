#include "evidencedesk/embed.hpp"

#include "evidencedesk/error.hpp"
#include "evidencedesk/text_util.hpp"

#include <Eigen/Dense>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "json.hpp"

namespace evidencedesk::embed {

using nlohmann::json;

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

EmbeddingVector normalize(const EmbeddingVector& v) {
  const double n = norm(v.values);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::kZeroVector,
                "cannot normalize a zero vector (model '" + v.model_id + "')");
  }
  EmbeddingVector out{v.model_id, v.values, true};
  for (double& x : out.values) x /= n;
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string clean_token(std::string_view raw) {
  std::size_t b = 0, e = raw.size();
  auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  while (b < e && !alnum(raw[b])) ++b;
  while (e > b && !alnum(raw[e - 1])) --e;
  return util::to_lower(raw.substr(b, e - b));
}

std::vector<std::string> feature_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) {
      auto t = clean_token(text.substr(start, i - start));
      if (!t.empty()) out.push_back(std::move(t));
    }
  }
  return out;
}

}  // namespace

HashingEmbedder::HashingEmbedder(std::string model_id, std::size_t dims,
                                 std::uint64_t seed)
    : model_id_(std::move(model_id)),
      dims_(dims),
      basis_(0xcbf29ce484222325ULL ^ splitmix64(seed)) {
  if (dims_ == 0) {
    throw Error(ErrorCode::kInvalidArgument, "embedding dims must be positive");
  }
}

EmbeddingVector HashingEmbedder::embed(std::string_view text) const {
  if (util::trim(text).empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot embed empty text");
  }
  EmbeddingVector v{model_id_, std::vector<double>(dims_, 0.0), false};
  auto add_feature = [&](const std::string& feature, double weight) {
    const std::uint64_t h = util::fnv1a64(feature, basis_);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v.values[h % dims_] += sign * weight;
  };
  const auto tokens = feature_tokens(text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add_feature("u:" + tokens[i], 1.0);
    if (i + 1 < tokens.size()) add_feature("b:" + tokens[i] + " " + tokens[i + 1], 0.5);
  }
  return v;
}

RemoteEmbedder::RemoteEmbedder(std::string model_id, std::string remote_model,
                               std::size_t dims,
                               std::shared_ptr<net::HttpTransport> transport,
                               std::string api_key, net::RetryPolicy policy)
    : model_id_(std::move(model_id)),
      remote_model_(std::move(remote_model)),
      dims_(dims),
      transport_(std::move(transport)),
      api_key_(std::move(api_key)),
      policy_(policy) {}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
  if (util::trim(text).empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot embed empty text");
  }
  net::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const json body{{"model", remote_model_}, {"input", std::string(text)}};
  auto res = net::post_with_retry(*transport_, "/embeddings", body.dump(),
                                  headers, policy_, {});
  EmbeddingVector v{model_id_, {}, false};
  try {
    v.values = json::parse(res.body).at("data").at(0).at("embedding")
                   .get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse,
                std::string("embedding response: ") + e.what());
  }
  if (v.values.size() != dims_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "model '" + model_id_ + "' declared " + std::to_string(dims_) +
                    " dims but returned " + std::to_string(v.values.size()));
  }
  return v;
}

std::shared_ptr<const EmbeddingProvider> make_provider(const std::string& model_id) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    auto colon = model_id.find(':', pos);
    parts.push_back(model_id.substr(pos, colon - pos));
    if (colon == std::string::npos) break;
    pos = colon + 1;
  }
  auto parse_count = [&](const std::string& s) -> std::size_t {
    try {
      std::size_t used = 0;
      auto v = std::stoull(s, &used);
      if (used != s.size() || v == 0) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bad number '" + s + "' in model id '" + model_id + "'");
    }
  };
  if (parts[0] == "hash" && (parts.size() == 2 || parts.size() == 3)) {
    std::uint64_t seed = parts.size() == 3 ? std::stoull(parts[2]) : 0;
    return std::make_shared<HashingEmbedder>(model_id, parse_count(parts[1]), seed);
  }
  if (parts[0] == "openai" && parts.size() == 3) {
    const char* base = std::getenv("EVIDENCEDESK_LLM_BASE_URL");
    const char* key = std::getenv("EVIDENCEDESK_LLM_API_KEY");
    if (!base || !*base) {
      throw Error(ErrorCode::kInvalidArgument,
                  "EVIDENCEDESK_LLM_BASE_URL is not set (needed by '" + model_id + "')");
    }
    return std::make_shared<RemoteEmbedder>(model_id, parts[1],
                                            parse_count(parts[2]),
                                            net::make_http_transport(base),
                                            key ? key : "");
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown embedding model id '" + model_id + "'");
}

AdapterMatrix AdapterMatrix::identity(std::string model_id, std::size_t d,
                                      double lambda) {
  AdapterMatrix a{std::move(model_id), d, lambda, 0, std::vector<double>(d * d, 0.0)};
  for (std::size_t i = 0; i < d; ++i) a.weights[i * d + i] = 1.0;
  return a;
}

AdapterMatrix train_adapter(const std::string& model_id,
                            std::span<const TrainingPair> pairs, double lambda,
                            std::size_t d) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be a positive finite real");
  }
  if (!pairs.empty()) {
    if (d == 0) d = pairs.front().query.size();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (pairs[i].query.size() != d || pairs[i].target.size() != d) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "training pair " + std::to_string(i) + " is not " +
                        std::to_string(d) + "-dimensional");
      }
    }
  }
  if (d == 0) {
    throw Error(ErrorCode::kInvalidArgument, "adapter dimension must be positive");
  }
  if (pairs.empty()) return AdapterMatrix::identity(model_id, d, lambda);

  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd gram = lambda * Eigen::MatrixXd::Identity(n, n);   // Q Q^T + lambda I
  Eigen::MatrixXd cross = lambda * Eigen::MatrixXd::Identity(n, n);  // T Q^T + lambda I
  for (const auto& p : pairs) {
    Eigen::Map<const Eigen::VectorXd> q(p.query.data(), n);
    Eigen::Map<const Eigen::VectorXd> t(p.target.data(), n);
    gram.noalias() += q * q.transpose();
    cross.noalias() += t * q.transpose();
  }
  // W gram = cross, gram symmetric: gram W^T = cross^T.
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw Error(ErrorCode::kSingular, "adapter normal equations are singular");
  }
  Eigen::MatrixXd w = ldlt.solve(cross.transpose()).transpose();
  if (!w.allFinite()) {
    throw Error(ErrorCode::kSingular, "adapter solution is not finite");
  }

  AdapterMatrix a{model_id, d, lambda, pairs.size(), std::vector<double>(d * d)};
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c)
      a.weights[r * d + c] = w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return a;
}

EmbeddingVector apply_adapter(const AdapterMatrix& adapter,
                              const EmbeddingVector& v) {
  if (v.dims() != adapter.d) {
    throw Error(ErrorCode::kDimensionMismatch,
                "adapter is " + std::to_string(adapter.d) +
                    "-dimensional, vector has " + std::to_string(v.dims()));
  }
  EmbeddingVector out{v.model_id, std::vector<double>(adapter.d, 0.0), false};
  for (std::size_t r = 0; r < adapter.d; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < adapter.d; ++c) s += adapter.at(r, c) * v.values[c];
    out.values[r] = s;
  }
  return normalize(out);
}

std::vector<TrainingPair> load_training_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<TrainingPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      pairs.push_back({j.at("query_vector").get<std::vector<double>>(),
                       j.at("target_vector").get<std::vector<double>>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(lineno) +
                                         ": " + e.what());
    }
  }
  return pairs;
}

void save_adapter(const AdapterMatrix& adapter, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << json{{"model_id", adapter.model_id},
              {"d", adapter.d},
              {"lambda", adapter.lambda},
              {"trained_pairs", adapter.trained_pairs},
              {"weights", adapter.weights}}
             .dump()
      << '\n';
}

AdapterMatrix load_adapter(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  AdapterMatrix a;
  try {
    auto j = json::parse(in);
    a.model_id = j.at("model_id").get<std::string>();
    a.d = j.at("d").get<std::size_t>();
    a.lambda = j.at("lambda").get<double>();
    a.trained_pairs = j.value("trained_pairs", std::size_t{0});
    a.weights = j.at("weights").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  if (a.d == 0 || a.weights.size() != a.d * a.d) {
    throw Error(ErrorCode::kSchema, path.string() + ": weights are not d x d");
  }
  for (double w : a.weights) {
    if (!std::isfinite(w)) throw Error(ErrorCode::kSchema, path.string() + ": non-finite weight");
  }
  return a;
}

}  // namespace evidencedesk::embed
