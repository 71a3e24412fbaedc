#pragma once

#include "confrag/confidence.hpp"
#include "confrag/corpus.hpp"
#include "confrag/embedding.hpp"
#include "confrag/generation.hpp"
#include "confrag/retrieval.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace confrag {

enum class PipelineKind { llm, vanilla, mixture, confident };

std::string_view to_string(PipelineKind kind);
/// Accepts "llm", "vanilla", "mixture", "confident".
PipelineKind parse_pipeline(std::string_view text);

struct Question {
  std::string id;
  std::string text;
};

struct PipelineConfig {
  RetrievalBudget budget{.k = 4, .quotas = {{ChunkKind::textbook, 1}, {ChunkKind::qa, 3}}};
  MetricName metric = MetricName::self_certainty;
  DecodeParams decode;
  std::uint64_t master_seed = 0;
  /// Run the N generations of confident mode on separate threads.
  bool parallel_fanout = true;
};

struct DroppedRecord {
  std::size_t model_index = 0;
  std::string error;
};

struct QuestionResult {
  std::string question_id;
  PipelineKind kind = PipelineKind::vanilla;
  /// Declared model indices used, ascending.
  std::vector<std::size_t> models;
  MetricName metric = MetricName::self_certainty;
  /// Completion text of the chosen record.
  std::string final_answer;
  /// Index into `records` of the chosen record.
  std::size_t winner = 0;
  /// Declared model index of the winner in confident mode.
  std::optional<std::size_t> winner_model_index;
  /// Ordered by model index in confident mode; a single record otherwise.
  std::vector<GenerationRecord> records;
  /// Retrieved chunk ids keyed by model index (vanilla, confident).
  std::map<std::size_t, std::vector<std::string>> retrieved;
  /// Fused references (mixture).
  std::vector<RetrievalCandidate> fused;
  std::vector<DroppedRecord> dropped;
};

/// 1-based, comma-joined label of a model subset ("1,3").
std::string combination_label(std::span<const std::size_t> models);

/// All subsets of {0..n-1} with sizes in `sizes`, by size then lexicographically.
std::vector<std::vector<std::size_t>> enumerate_combinations(std::size_t n,
                                                             std::span<const std::size_t> sizes);

/// Decode seed for every generation of one question. Together with the prompt
/// it fixes the mock output, so runs that build the same prompt agree.
std::uint64_t derive_seed(std::uint64_t master, std::string_view question_id);

/// Runs the three retrieval-augmented flows over shared providers and one
/// backend. Chunk embeddings are computed once at construction; afterwards the
/// engine is read-only and may be used from several threads.
class Engine {
 public:
  Engine(const Corpus& corpus, std::vector<std::shared_ptr<const EmbeddingProvider>> providers,
         std::shared_ptr<const LlmBackend> backend, PromptTemplate prompt_template,
         PipelineConfig config);

  /// Plain LLM: bare-question prompt, no retrieval.
  QuestionResult run_llm(const Question& question) const;
  /// Retrieval with one model, one generation.
  QuestionResult run_vanilla(const Question& question, std::size_t model_index) const;
  /// Standardize-pool-dedup retrieval across models, one generation.
  QuestionResult run_mixture(const Question& question, std::span<const std::size_t> models) const;
  /// One vanilla run per model, then the most confident answer wins.
  /// A model whose run fails with a transport error (after retries) is dropped
  /// and logged; contract violations abort. All models failing is a StageError.
  QuestionResult run_confident(const Question& question, std::span<const std::size_t> models) const;

  /// Confident selection over already generated vanilla records (one per
  /// model, scored). Equivalent to run_confident when the records came from
  /// run_vanilla with the same config.
  QuestionResult select_confident(const Question& question,
                                  std::span<const QuestionResult> vanilla_runs,
                                  MetricName metric) const;

  const PipelineConfig& config() const noexcept { return config_; }
  const LlmBackend& backend() const noexcept { return *backend_; }
  std::size_t model_count() const noexcept { return providers_.size(); }
  const EmbeddingProvider& provider(std::size_t index) const { return *providers_.at(index); }

 private:
  std::vector<std::size_t> checked_models(std::span<const std::size_t> models) const;
  GenerationRecord generate_scored(const Question& question, std::span<const std::size_t> models,
                                   std::span<const Chunk> references) const;

  const Corpus* corpus_;
  std::vector<std::shared_ptr<const EmbeddingProvider>> providers_;
  std::vector<std::unique_ptr<ChunkIndex>> indexes_;
  std::shared_ptr<const LlmBackend> backend_;
  PromptTemplate template_;
  PipelineConfig config_;
};

}  // namespace confrag
