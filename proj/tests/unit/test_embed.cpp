#include "evidencedesk/embed.hpp"
#include "evidencedesk/error.hpp"
#include "evidencedesk/index.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "json.hpp"

namespace ed = evidencedesk;
using ed::embed::EmbeddingVector;
using ed::embed::TrainingPair;

namespace {

double frob_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::vector<double> identity(std::size_t d) {
  std::vector<double> m(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) m[i * d + i] = 1.0;
  return m;
}

std::vector<double> matvec(const std::vector<double>& m, const std::vector<double>& v) {
  const std::size_t d = v.size();
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[i] += m[i * d + j] * v[j];
  }
  return out;
}

struct Planted {
  std::vector<double> rotation;
  std::vector<TrainingPair> pairs;
};

Planted planted_rotation(std::size_t d, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Planted p;
  p.rotation = edtest::random_orthogonal(d, rng);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> q(d);
    for (auto& x : q) x = normal(rng);
    p.pairs.push_back({q, matvec(p.rotation, q)});
  }
  return p;
}

}  // namespace

TEST(Normalize, Examples) {
  const auto v = ed::embed::normalize({"m", {3.0, 4.0}, false});
  EXPECT_DOUBLE_EQ(v.values[0], 0.6);
  EXPECT_DOUBLE_EQ(v.values[1], 0.8);
  EXPECT_TRUE(v.normalized);
  const auto again = ed::embed::normalize(v);
  EXPECT_NEAR(again.values[0], 0.6, 1e-12);
  EXPECT_NEAR(again.values[1], 0.8, 1e-12);
  try {
    ed::embed::normalize({"m", {0.0, 0.0}, false});
    FAIL();
  } catch (const ed::Error& e) {
    EXPECT_EQ(e.code(), ed::ErrorCode::kZeroVector);
  }
}

TEST(HashingEmbedder, DeterministicAndDeclaredDims) {
  const ed::embed::HashingEmbedder e("hash:384:1", 384, 1);
  const auto a = e.embed("Bladder training reduces urge incontinence.");
  const auto b = e.embed("Bladder training reduces urge incontinence.");
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.dims(), 384u);
  EXPECT_EQ(a.model_id, "hash:384:1");
  for (double x : a.values) EXPECT_TRUE(std::isfinite(x));
  EXPECT_THROW(e.embed(""), ed::Error);
}

TEST(HashingEmbedder, UnrelatedTextsAreDissimilar) {
  const ed::embed::HashingEmbedder e("hash:384:1", 384, 1);
  const auto a = e.embed("Amoxicillin is the first-line antibiotic for acute otitis media.");
  const auto b = e.embed("The committee approved the annual budget for road maintenance.");
  EXPECT_LT(ed::index::cosine_similarity(a.values, b.values), 0.5);
  const auto c = e.embed("Amoxicillin remains first-line therapy for otitis media in children.");
  EXPECT_GT(ed::index::cosine_similarity(a.values, c.values),
            ed::index::cosine_similarity(a.values, b.values));
}

TEST(HashingEmbedder, SeedChangesTheProjection) {
  const ed::embed::HashingEmbedder a("a", 256, 1), b("b", 256, 2);
  EXPECT_NE(a.embed("same words").values, b.embed("same words").values);
}

TEST(MakeProvider, ParsesIds) {
  const auto p = ed::embed::make_provider("hash:1024:2");
  EXPECT_EQ(p->dims(), 1024u);
  EXPECT_EQ(p->model_id(), "hash:1024:2");
  EXPECT_EQ(ed::embed::make_provider("hash:16")->dims(), 16u);
  EXPECT_THROW(ed::embed::make_provider("hash:zero"), ed::Error);
  EXPECT_THROW(ed::embed::make_provider("nope:1"), ed::Error);
}

TEST(RemoteEmbedder, ReadsEmbeddingAndChecksDims) {
  auto t = std::make_shared<edtest::FakeTransport>();
  t->push_response(200, R"({"data":[{"embedding":[0.5,0.25,1.0]}]})");
  t->push_response(200, R"({"data":[{"embedding":[0.5,0.25]}]})");
  t->push_response(200, R"({"nope":1})");
  const ed::embed::RemoteEmbedder e("openai:ada:3", "ada", 3, t, "key", edtest::fast_retry());
  const auto v = e.embed("hello");
  EXPECT_EQ(v.values, (std::vector<double>{0.5, 0.25, 1.0}));
  const auto req = nlohmann::json::parse(t->requests().at(0).body);
  EXPECT_EQ(req["model"], "ada");
  EXPECT_EQ(req["input"], "hello");
  EXPECT_EQ(t->requests().at(0).path, "/embeddings");
  try {
    e.embed("hello");
    FAIL();
  } catch (const ed::Error& err) {
    EXPECT_EQ(err.code(), ed::ErrorCode::kDimensionMismatch);
  }
  try {
    e.embed("hello");
    FAIL();
  } catch (const ed::Error& err) {
    EXPECT_EQ(err.code(), ed::ErrorCode::kMalformedResponse);
  }
}

TEST(RemoteEmbedder, TransportFailurePropagates) {
  auto t = std::make_shared<edtest::FakeTransport>();
  const ed::embed::RemoteEmbedder e("openai:ada:3", "ada", 3, t, "key", edtest::fast_retry(1));
  try {
    e.embed("x");
    FAIL();
  } catch (const ed::Error& err) {
    EXPECT_EQ(err.code(), ed::ErrorCode::kTransport);
  }
  EXPECT_EQ(t->requests_sent(), 2u);
}

TEST(TrainAdapter, EmptyPairsGiveIdentity) {
  const auto w = ed::embed::train_adapter("m", {}, 0.7, 5);
  EXPECT_EQ(w.weights, identity(5));
  EXPECT_EQ(w.trained_pairs, 0u);
  EXPECT_THROW(ed::embed::train_adapter("m", {}, 0.7, 0), ed::Error);
}

TEST(TrainAdapter, OneDimensionalLeastSquares) {
  const std::vector<TrainingPair> pairs{{{2.0}, {4.0}}};
  const auto w = ed::embed::train_adapter("m", pairs, 1e-12);
  EXPECT_NEAR(w.at(0, 0), 2.0, 1e-9);
}

TEST(TrainAdapter, RejectsBadInput) {
  const std::vector<TrainingPair> mixed{{{1.0, 2.0}, {1.0, 2.0}}, {{1.0}, {1.0}}};
  EXPECT_THROW(ed::embed::train_adapter("m", mixed, 1.0), ed::Error);
  const std::vector<TrainingPair> ok{{{1.0, 2.0}, {1.0, 2.0}}};
  EXPECT_THROW(ed::embed::train_adapter("m", ok, 0.0), ed::Error);
  EXPECT_THROW(ed::embed::train_adapter("m", ok, -1.0), ed::Error);
}

TEST(TrainAdapter, MatchesGaussJordanOracle) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + rng() % 7;
    const std::size_t n = rng() % 20;
    std::vector<TrainingPair> pairs;
    std::vector<std::vector<double>> q, t;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> a(d), b(d);
      for (auto& x : a) x = normal(rng);
      for (auto& x : b) x = normal(rng);
      pairs.push_back({a, b});
      q.push_back(a);
      t.push_back(b);
    }
    const double lambda = 0.05 + static_cast<double>(rng() % 100) / 10.0;
    const auto w = ed::embed::train_adapter("m", pairs, lambda, d);
    if (n == 0) {
      EXPECT_EQ(w.weights, identity(d));
      continue;
    }
    const auto oracle = edtest::ridge_adapter_oracle(q, t, lambda);
    EXPECT_LT(frob_distance(w.weights, oracle), 1e-9) << "trial " << trial;
  }
}

TEST(TrainAdapter, RecoversPlantedRotation) {
  const auto p = planted_rotation(8, 64, 4242);
  const auto w = ed::embed::train_adapter("m", p.pairs, 1e-6);
  EXPECT_LT(frob_distance(w.weights, p.rotation), 1e-6);
  for (const auto& pair : p.pairs) {
    const auto out = ed::embed::apply_adapter(w, {"m", pair.query, false});
    EXPECT_TRUE(out.normalized);
    EXPECT_GT(ed::index::cosine_similarity(out.values, pair.target), 0.999);
  }
}

TEST(TrainAdapter, LargeLambdaApproachesIdentity) {
  const auto p = planted_rotation(8, 64, 4242);
  const auto w = ed::embed::train_adapter("m", p.pairs, 1e9);
  EXPECT_LT(frob_distance(w.weights, identity(8)), 1e-6);
}

TEST(TrainAdapter, PermutationInvariant) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = planted_rotation(6, 30, 100 + trial);
    for (auto& pair : p.pairs) pair.target[0] += 0.1 * static_cast<double>(rng() % 7);
    const auto a = ed::embed::train_adapter("m", p.pairs, 0.3);
    std::shuffle(p.pairs.begin(), p.pairs.end(), rng);
    const auto b = ed::embed::train_adapter("m", p.pairs, 0.3);
    EXPECT_LT(frob_distance(a.weights, b.weights), 1e-10);
  }
}

TEST(TrainAdapter, ResidualImproves) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t d = 3 + rng() % 5;
    std::vector<TrainingPair> pairs;
    for (std::size_t i = 0; i < 1 + rng() % 40; ++i) {
      std::vector<double> a(d), b(d);
      for (auto& x : a) x = normal(rng);
      for (auto& x : b) x = normal(rng);
      pairs.push_back({a, b});
    }
    const double lambda = std::pow(10.0, static_cast<double>(rng() % 9) - 4.0);
    const auto w = ed::embed::train_adapter("m", pairs, lambda);
    double before = 0.0, after = 0.0;
    for (const auto& pr : pairs) {
      const auto wq = matvec(w.weights, pr.query);
      for (std::size_t i = 0; i < d; ++i) {
        before += (pr.query[i] - pr.target[i]) * (pr.query[i] - pr.target[i]);
        after += (wq[i] - pr.target[i]) * (wq[i] - pr.target[i]);
      }
    }
    EXPECT_LE(after, before + 1e-9) << "trial " << trial;
  }
}

TEST(ApplyAdapter, IdentityAndMismatch) {
  const auto id = ed::embed::AdapterMatrix::identity("m", 2, 1.0);
  const auto out = ed::embed::apply_adapter(id, {"m", {3.0, 4.0}, false});
  EXPECT_NEAR(out.values[0], 0.6, 1e-15);
  EXPECT_NEAR(out.values[1], 0.8, 1e-15);
  EXPECT_TRUE(out.normalized);
  EXPECT_THROW(ed::embed::apply_adapter(id, {"m", {1.0, 2.0, 3.0}, false}), ed::Error);
  ed::embed::AdapterMatrix zero = id;
  zero.weights.assign(4, 0.0);
  EXPECT_THROW(ed::embed::apply_adapter(zero, {"m", {1.0, 2.0}, false}), ed::Error);
}

TEST(AdapterFiles, RoundTripAndPairsFile) {
  edtest::TempDir tmp;
  const auto p = planted_rotation(4, 10, 5);
  const auto w = ed::embed::train_adapter("hash:4:1", p.pairs, 0.5);
  ed::embed::save_adapter(w, tmp / "a.json");
  const auto back = ed::embed::load_adapter(tmp / "a.json");
  EXPECT_EQ(back.model_id, w.model_id);
  EXPECT_EQ(back.d, w.d);
  EXPECT_EQ(back.trained_pairs, 10u);
  EXPECT_LT(frob_distance(back.weights, w.weights), 1e-15);

  edtest::write_file(tmp / "pairs.jsonl",
                     "{\"query_vector\":[1,0],\"target_vector\":[0,1]}\n\n"
                     "{\"query_vector\":[0,1],\"target_vector\":[1,0]}\n");
  EXPECT_EQ(ed::embed::load_training_pairs(tmp / "pairs.jsonl").size(), 2u);
  edtest::write_file(tmp / "bad.jsonl", "{\"query_vector\":[1,0]}\n");
  EXPECT_THROW(ed::embed::load_training_pairs(tmp / "bad.jsonl"), ed::Error);
}
