#pragma once

#include "confrag/http.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace confrag {

/// Dense embedding produced by one provider. Construction rejects empty,
/// non-finite and zero-norm vectors, so every instance is usable in cosine().
class EmbeddingVector {
 public:
  EmbeddingVector(std::vector<double> values, std::string model_id);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t dimension() const noexcept { return values_.size(); }
  const std::string& model_id() const noexcept { return model_id_; }
  double norm() const noexcept { return norm_; }

  friend bool operator==(const EmbeddingVector& a, const EmbeddingVector& b) {
    return a.model_id_ == b.model_id_ && a.values_ == b.values_;
  }

 private:
  std::vector<double> values_;
  std::string model_id_;
  double norm_ = 0.0;
};

/// Cosine similarity on raw vectors, clamped to [-1, 1].
/// Throws ContractError on dimension mismatch.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// An embedding model g_i. Implementations must be safe for concurrent calls
/// and return identical vectors for identical text.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual const std::string& model_id() const noexcept = 0;
  /// "deterministic-test" or "remote".
  virtual std::string mode() const = 0;

  /// One vector per input, in input order, all of one dimension.
  /// Throws InputError on an empty batch, ContractError on dimension
  /// mismatch or zero vectors, TransportError on network failure.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;
};

/// Feature-hashing embedder keyed by model id. Tokens are lower-cased
/// alphanumeric runs; each token adds a seeded pseudo-random contribution to
/// a few coordinates. Texts sharing vocabulary land close together, and
/// distinct model ids induce distinct geometries. Pure function of
/// (model id, text).
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::string model_id, std::size_t dimension = 64);

  const std::string& model_id() const noexcept override { return model_id_; }
  std::string mode() const override { return "deterministic-test"; }
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;

  EmbeddingVector embed_one(const std::string& text) const;

 private:
  std::string model_id_;
  std::size_t dimension_;
  std::uint64_t seed_;
};

struct RemoteEmbeddingSettings {
  HttpSettings http;
  /// Value of the "model" field sent to the endpoint.
  std::string model;
  std::size_t batch_size = 64;
};

/// OpenAI-compatible embeddings client: POST /v1/embeddings.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(std::string model_id, RemoteEmbeddingSettings settings);

  const std::string& model_id() const noexcept override { return model_id_; }
  std::string mode() const override { return "remote"; }
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;

 private:
  std::string model_id_;
  RemoteEmbeddingSettings settings_;
  JsonHttpClient client_;
};

/// Checks the batch-level contract shared by all providers.
void validate_embedding_batch(std::span<const EmbeddingVector> vectors, std::size_t expected_count);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace confrag
