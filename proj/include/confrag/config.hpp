#pragma once

#include "confrag/confidence.hpp"
#include "confrag/corpus.hpp"
#include "confrag/embedding.hpp"
#include "confrag/generation.hpp"
#include "confrag/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace confrag {

struct CorpusSource {
  std::string path;
  ChunkKind kind = ChunkKind::qa;
};

struct EmbeddingModelConfig {
  std::string id;
  /// "deterministic-test" or "remote".
  std::string mode = "deterministic-test";
  std::size_t dimension = 64;
  std::string endpoint;
  std::string model;
  std::string api_key_env;
  std::size_t batch_size = 64;
};

struct BackendConfig {
  /// "mock" or "remote".
  std::string mode = "mock";
  std::string endpoint;
  std::string model;
  std::string api_key_env;
  int top_logprobs = 20;
  std::size_t vocab_size = 32'000;
  int timeout_ms = 60'000;
  int max_retries = 3;
  int backoff_ms = 250;
};

/// Everything a run needs. Loaded from JSON; unknown keys are rejected.
/// Model numbers in the file are 1-based; in memory they are 0-based.
struct RunConfig {
  std::vector<CorpusSource> corpus;
  std::string gold;
  std::string output_dir = "out";
  std::vector<EmbeddingModelConfig> embedding_models;
  /// Subset sizes swept by `eval` when `combinations` is empty.
  std::vector<std::size_t> combination_sizes{2, 3, 4};
  std::vector<std::vector<std::size_t>> combinations;
  std::size_t k = 4;
  std::map<ChunkKind, std::size_t> quotas{{ChunkKind::textbook, 1}, {ChunkKind::qa, 3}};
  PipelineKind pipeline = PipelineKind::confident;
  MetricName metric = MetricName::self_certainty;
  /// Models used by `ask`; empty means all.
  std::vector<std::size_t> models;
  BackendConfig backend;
  double temperature = 0.0;
  int max_tokens = 512;
  std::string template_path;
  std::uint64_t seed = 0;
  std::size_t concurrency = 1;
  double cdf_sigma = 1.0;
  std::optional<std::size_t> max_questions;
};

/// Throws InputError naming the offending key.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical form; parse_run_config(run_config_to_json(c)) reproduces c.
nlohmann::json run_config_to_json(const RunConfig& config);
/// Cross-field checks (model references, sizes). Throws InputError.
void validate(const RunConfig& config);
/// Hex FNV-1a of the canonical JSON, leaving out the output directory.
std::string config_hash(const RunConfig& config);

PipelineConfig pipeline_config(const RunConfig& config);
std::vector<std::shared_ptr<const EmbeddingProvider>> make_providers(const RunConfig& config);
std::shared_ptr<const LlmBackend> make_backend(const RunConfig& config);
PromptTemplate make_template(const RunConfig& config);

/// Run manifest written next to every report.
nlohmann::json make_manifest(const RunConfig& config, const LlmBackend& backend,
                             const std::vector<std::shared_ptr<const EmbeddingProvider>>& providers,
                             const PromptTemplate& prompt_template, const std::string& status);

}  // namespace confrag
