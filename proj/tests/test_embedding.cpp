#include "confrag/embedding.hpp"
#include "confrag/errors.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace confrag;

namespace {
EmbeddingVector vec(std::vector<double> v) { return EmbeddingVector(std::move(v), "m"); }
}  // namespace

TEST_CASE("cosine worked values") {
  CHECK(cosine(vec({3, 4}), vec({3, 4})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(cosine(vec({1, 0}), vec({0, 1}))) <= 1e-12);
  CHECK(std::abs(cosine(vec({1, 0}), vec({1, 1})) - 0.707107) <= 1e-6);
  CHECK(std::abs(cosine(vec({1, 0}), vec({1, 1})) - 1.0 / std::sqrt(2.0)) <= 1e-9);
}

TEST_CASE("cosine properties") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int t = 0; t < 500; ++t) {
    const std::size_t d = 1 + rng() % 64;
    std::vector<double> a(d), b(d);
    for (std::size_t i = 0; i < d; ++i) {
      a[i] = normal(rng);
      b[i] = normal(rng);
    }
    const double lambda = scale(rng);
    std::vector<double> lb = b;
    for (auto& x : lb) {
      x *= lambda;
    }
    const auto c = cosine(vec(a), vec(b));
    CHECK(c == cosine(vec(b), vec(a)));
    CHECK(std::abs(cosine(vec(a), vec(lb)) - c) <= 1e-9);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
    CHECK(std::abs(c - oracle::dot_cosine(a, b)) <= 1e-12);
  }
  // Parallel vectors whose rounding would overshoot stay in range.
  CHECK(cosine(vec({0.1, 0.2, 0.3}), vec({0.1, 0.2, 0.3})) <= 1.0);
}

TEST_CASE("vector construction rejects bad input") {
  CHECK_THROWS_AS(vec({}), ContractError);
  CHECK_THROWS_AS(vec({0.0, 0.0}), ContractError);
  CHECK_THROWS_AS(vec({1.0, std::numeric_limits<double>::infinity()}), ContractError);
  CHECK_THROWS_AS(vec({std::nan("")}), ContractError);
  CHECK_THROWS_AS(cosine(vec({1, 0}), vec({1, 0, 0})), ContractError);
}

TEST_CASE("hash provider is deterministic and provider-distinct") {
  HashEmbeddingProvider a("model-a", 32);
  HashEmbeddingProvider a2("model-a", 32);
  HashEmbeddingProvider b("model-b", 32);
  const std::vector<std::string> texts{"How many apples?", "How many apples?", "Three pears"};
  const auto va = a.embed(texts);
  REQUIRE(va.size() == 3);
  CHECK(va[0] == va[1]);
  CHECK(va[0].dimension() == 32);
  CHECK(va[2].dimension() == 32);
  CHECK(a2.embed(texts)[2] == va[2]);
  CHECK(b.embed_one("Three pears").values().size() == 32);
  CHECK_FALSE(std::equal(va[2].values().begin(), va[2].values().end(), b.embed_one("Three pears").values().begin()));
  // Text without alphanumerics still yields a usable vector.
  CHECK(a.embed_one("?!").norm() > 0.0);
  CHECK(a.embed_one("").norm() > 0.0);
  CHECK_THROWS_AS(a.embed(std::vector<std::string>{}), InputError);
  CHECK(a.mode() == "deterministic-test");
}

TEST_CASE("shared vocabulary means higher similarity") {
  HashEmbeddingProvider p("m", 64);
  const auto q = p.embed_one("how many apples are in five boxes");
  const auto near = p.embed_one("apples in boxes how many");
  const auto far = p.embed_one("photosynthesis converts light");
  CHECK(cosine(q, near) > cosine(q, far));
}

TEST_CASE("batch validation") {
  std::vector<EmbeddingVector> mixed{vec({1, 2}), vec({1, 2, 3})};
  CHECK_THROWS_AS(validate_embedding_batch(mixed, 2), DimensionMismatchError);
  std::vector<EmbeddingVector> ok{vec({1, 2}), vec({3, 4})};
  CHECK_NOTHROW(validate_embedding_batch(ok, 2));
  CHECK_THROWS_AS(validate_embedding_batch(ok, 3), ContractError);
}
