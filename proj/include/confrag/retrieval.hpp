#pragma once

#include "confrag/corpus.hpp"
#include "confrag/embedding.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace confrag {

struct ScoredChunk {
  std::string chunk_id;
  /// Ingestion ordinal in the corpus; the tie-break key.
  std::size_t ordinal = 0;
  ChunkKind kind = ChunkKind::qa;
  double score = 0.0;
};

/// Similarities between one question and every eligible chunk under one
/// embedding model. Entries are kept in ingestion order.
struct SimilarityRow {
  std::string model_id;
  std::string question_id;
  std::vector<ScoredChunk> entries;
};

struct RetrievalCandidate {
  std::string model_id;
  /// Position of the model in the declared model list.
  std::size_t model_index = 0;
  std::string chunk_id;
  std::size_t ordinal = 0;
  ChunkKind kind = ChunkKind::qa;
  double raw = 0.0;
  double standardized = 0.0;
  /// 1-based rank of the chunk in its own model's standardized ordering.
  std::size_t rank_within_model = 0;
};

/// How many chunks to retrieve. When `quotas` is non-empty it replaces `k`:
/// the best `quotas[kind]` chunks of each listed kind are kept and unlisted
/// kinds get nothing.
struct RetrievalBudget {
  std::size_t k = 4;
  std::map<ChunkKind, std::size_t> quotas;

  bool uses_quotas() const noexcept { return !quotas.empty(); }
  std::size_t total() const noexcept;
};

/// Chunk embeddings for one provider over one corpus, computed once.
/// Read-only after construction and safe to share across threads.
class ChunkIndex {
 public:
  ChunkIndex(const EmbeddingProvider& provider, const Corpus& corpus, std::size_t batch_size = 64);

  const EmbeddingProvider& provider() const noexcept { return *provider_; }
  const Corpus& corpus() const noexcept { return *corpus_; }
  const EmbeddingVector& vector_at(std::size_t ordinal) const { return vectors_.at(ordinal); }
  std::span<const EmbeddingVector> vectors() const noexcept { return vectors_; }

 private:
  const EmbeddingProvider* provider_;
  const Corpus* corpus_;
  std::vector<EmbeddingVector> vectors_;
};

/// Cosine similarity of the question against every chunk (optionally of one kind).
/// Throws InputError when no chunk is eligible.
SimilarityRow score_all(const EmbeddingProvider& provider, std::string question_id,
                        const std::string& question, const Corpus& corpus,
                        std::optional<ChunkKind> kind_filter = std::nullopt);
/// Same, reusing precomputed chunk embeddings.
SimilarityRow score_all(const ChunkIndex& index, std::string question_id,
                        const std::string& question,
                        std::optional<ChunkKind> kind_filter = std::nullopt);

/// The k best chunk ids, descending by score; ties go to the earlier-ingested chunk.
std::vector<std::string> top_k(const SimilarityRow& row, std::size_t k);
/// top_k generalised to per-kind quotas.
std::vector<std::string> select_top(const SimilarityRow& row, const RetrievalBudget& budget);

/// Z-scores over all entries of the row, population standard deviation.
/// A constant row standardizes to all zeros.
std::vector<double> standardize(std::span<const double> scores);
SimilarityRow standardize(const SimilarityRow& row);

/// Mixture-embedding fusion: standardize each row, pool, keep one candidate per
/// chunk (highest standardized score, then lowest model index), order by
/// standardized score descending then ingestion order, and cut to the budget.
/// Row i is model index i. Throws InputError for zero rows or rows that
/// disagree on a chunk's ordinal or kind.
std::vector<RetrievalCandidate> fuse(std::span<const SimilarityRow> rows,
                                     const RetrievalBudget& budget);
/// Fusion over rows that are already standardized. `raw` and `standardized`
/// must be entry-aligned.
std::vector<RetrievalCandidate> fuse_standardized(std::span<const SimilarityRow> raw,
                                                  std::span<const SimilarityRow> standardized,
                                                  const RetrievalBudget& budget);

/// Prompt template with `{{question}}` and `{{references}}` placeholders.
/// Text between `{{#references}}` and `{{/references}}` is emitted only when
/// at least one reference is given. Each reference is rendered through
/// `reference_format`, where `{n}` is the 1-based number and `{text}` the
/// chunk text; blocks are separated by a blank line.
class PromptTemplate {
 public:
  /// Throws InputError unless both placeholders occur exactly once, the
  /// question is outside the optional section, and sections are balanced.
  explicit PromptTemplate(std::string text, std::string reference_format = "[{n}] {text}");

  static PromptTemplate builtin();
  static PromptTemplate from_file(const std::string& path);
  static const std::string& builtin_text();

  std::string render(std::string_view question, std::span<const Chunk> references) const;

  const std::string& text() const noexcept { return text_; }

 private:
  enum class Part { literal, question, references, section_begin, section_end };
  struct Segment {
    Part part;
    std::string literal;
  };

  std::string text_;
  std::string reference_format_;
  std::vector<Segment> segments_;
};

std::string assemble_prompt(const PromptTemplate& tmpl, std::string_view question,
                            std::span<const Chunk> references);

}  // namespace confrag
