#include "confrag/embedding.hpp"

#include "confrag/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace confrag {
namespace {

constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31U);
}

// Uniform in [-1, 1).
double unit_signed(std::uint64_t bits) {
  return static_cast<double>(bits >> 11U) * 0x1.0p-52 - 1.0;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const unsigned char ch : text) {
    if (std::isalnum(ch) != 0) {
      current.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) {
    tokens.push_back(std::move(current));
  }
  return tokens;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t hash = seed;
  for (const unsigned char ch : bytes) {
    hash ^= ch;
    hash *= kFnvPrime;
  }
  return hash;
}

EmbeddingVector::EmbeddingVector(std::vector<double> values, std::string model_id)
    : values_(std::move(values)), model_id_(std::move(model_id)) {
  if (values_.empty()) {
    throw ContractError("embedding from '" + model_id_ + "' is empty");
  }
  double sum_sq = 0.0;
  for (const double v : values_) {
    if (!std::isfinite(v)) {
      throw ContractError("embedding from '" + model_id_ + "' has a non-finite entry");
    }
    sum_sq += v * v;
  }
  norm_ = std::sqrt(sum_sq);
  if (!(norm_ > 0.0)) {
    throw ContractError("embedding from '" + model_id_ + "' is the zero vector");
  }
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw ContractError("cosine: dimension mismatch (" + std::to_string(a.dimension()) +
                        " vs " + std::to_string(b.dimension()) + ")");
  }
  const auto av = a.values();
  const auto bv = b.values();
  double dot = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
  }
  return std::clamp(dot / (a.norm() * b.norm()), -1.0, 1.0);
}

void validate_embedding_batch(std::span<const EmbeddingVector> vectors,
                              std::size_t expected_count) {
  if (vectors.size() != expected_count) {
    throw ContractError("provider returned " + std::to_string(vectors.size()) +
                        " embeddings for " + std::to_string(expected_count) + " inputs");
  }
  for (const auto& v : vectors) {
    if (v.dimension() != vectors.front().dimension()) {
      throw DimensionMismatchError("dimension mismatch within batch from '" + v.model_id() + "' (" +
                          std::to_string(vectors.front().dimension()) + " vs " +
                          std::to_string(v.dimension()) + ")");
    }
  }
}

HashEmbeddingProvider::HashEmbeddingProvider(std::string model_id, std::size_t dimension)
    : model_id_(std::move(model_id)), dimension_(dimension), seed_(fnv1a64(model_id_)) {
  if (dimension_ < 2) {
    throw InputError("hash embedding dimension must be at least 2");
  }
}

EmbeddingVector HashEmbeddingProvider::embed_one(const std::string& text) const {
  std::vector<double> values(dimension_, 0.0);
  constexpr int kTouchesPerToken = 4;
  for (const auto& token : tokenize(text)) {
    std::uint64_t state = fnv1a64(token, seed_);
    for (int t = 0; t < kTouchesPerToken; ++t) {
      state = splitmix64(state);
      const auto index = static_cast<std::size_t>(state % dimension_);
      state = splitmix64(state);
      values[index] += unit_signed(state);
    }
  }
  // Shift away from the origin: a text with no tokens, or whose contributions
  // cancel exactly, still gets a valid seeded vector.
  const bool all_zero = std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
  if (all_zero) {
    std::uint64_t state = fnv1a64(text, seed_);
    for (auto& v : values) {
      state = splitmix64(state);
      v = unit_signed(state);
    }
    values[0] += 2.0;
  }
  return EmbeddingVector(std::move(values), model_id_);
}

std::vector<EmbeddingVector> HashEmbeddingProvider::embed(std::span<const std::string> texts) const {
  if (texts.empty()) {
    throw InputError("embed: empty input batch");
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    out.push_back(embed_one(text));
  }
  return out;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::string model_id,
                                                 RemoteEmbeddingSettings settings)
    : model_id_(std::move(model_id)), settings_(std::move(settings)), client_(settings_.http) {
  if (settings_.batch_size == 0) {
    throw InputError("embedding batch size must be positive");
  }
  if (settings_.model.empty()) {
    settings_.model = model_id_;
  }
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed(std::span<const std::string> texts) const {
  if (texts.empty()) {
    throw InputError("embed: empty input batch");
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t begin = 0; begin < texts.size(); begin += settings_.batch_size) {
    const auto end = std::min(texts.size(), begin + settings_.batch_size);
    nlohmann::json request = {{"model", settings_.model},
                              {"input", std::vector<std::string>(texts.begin() + begin,
                                                                 texts.begin() + end)}};
    const auto response = client_.post("/v1/embeddings", request);
    const auto data = response.find("data");
    if (data == response.end() || !data->is_array()) {
      throw ContractError("embeddings response has no 'data' array");
    }
    if (data->size() != end - begin) {
      throw ContractError("embeddings response has " + std::to_string(data->size()) +
                          " items for " + std::to_string(end - begin) + " inputs");
    }
    // Items may carry an explicit "index"; honour it when present.
    std::vector<const nlohmann::json*> ordered(data->size(), nullptr);
    for (std::size_t i = 0; i < data->size(); ++i) {
      const auto& item = (*data)[i];
      std::size_t slot = i;
      if (item.contains("index") && item["index"].is_number_unsigned()) {
        slot = item["index"].get<std::size_t>();
      }
      if (slot >= ordered.size() || ordered[slot] != nullptr) {
        throw ContractError("embeddings response has an invalid or repeated index");
      }
      ordered[slot] = &item;
    }
    for (const auto* item : ordered) {
      const auto embedding = item->find("embedding");
      if (embedding == item->end() || !embedding->is_array()) {
        throw ContractError("embeddings response item has no 'embedding' array");
      }
      std::vector<double> values;
      values.reserve(embedding->size());
      for (const auto& v : *embedding) {
        if (!v.is_number()) {
          throw ContractError("embedding contains a non-numeric entry");
        }
        values.push_back(v.get<double>());
      }
      out.emplace_back(std::move(values), model_id_);
    }
  }
  validate_embedding_batch(out, texts.size());
  return out;
}

}  // namespace confrag
