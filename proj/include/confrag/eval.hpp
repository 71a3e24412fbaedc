#pragma once

#include "confrag/confidence.hpp"
#include "confrag/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace confrag {

struct QAItem {
  std::string id;
  std::string question;
  std::string answer;
};

/// Reads {"id", "question", "answer"} JSONL. Throws InputError with the line
/// number on malformed lines, empty gold answers or duplicate ids.
std::vector<QAItem> load_gold(const std::filesystem::path& path);

/// Final answer of a completion: the trimmed text after the last "####" when
/// present, else the last number in the text. Commas are removed. nullopt
/// when neither exists.
std::optional<std::string> extract_answer(std::string_view completion);

/// Numeric comparison with 1e-6 relative tolerance when both sides parse as
/// numbers, trimmed exact match otherwise. A gold answer in worked-solution
/// form ("... #### 72") is reduced to its final value first.
bool is_correct(const std::optional<std::string>& extracted, std::string_view gold);

struct AccuracyCell {
  PipelineKind kind = PipelineKind::vanilla;
  std::vector<std::size_t> models;
  std::optional<MetricName> metric;
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
};

struct DroppedEntry {
  std::string question_id;
  std::string combination;
  std::size_t model_index = 0;
  std::string error;
};

/// Accuracy table data shaped after the three comparison tables: bare LLM vs
/// single-model RAG, mixture by subset size, and confident selection by subset
/// and metric. Every delta is the difference of two stored accuracies.
struct AccuracyReport {
  std::string llm;
  std::vector<std::string> embedding_models;
  std::vector<AccuracyCell> cells;
  std::vector<DroppedEntry> dropped;
  std::string manifest_file;
  std::string config_hash;

  // Derived from `cells` by summarize().
  std::optional<double> vanilla_llm;
  std::vector<std::optional<double>> vanilla_rag;
  std::optional<double> vanilla_rag_avg;
  std::optional<double> rag_vs_llm;
  std::map<std::size_t, double> mixture_by_size;
  std::optional<double> mixture_avg;
  std::optional<double> mixture_vs_llm;
  std::optional<double> mixture_vs_rag;
  std::map<MetricName, std::map<std::size_t, double>> confident_by_size;
  std::map<MetricName, double> confident_avg;
  std::map<MetricName, double> confident_vs_rag;
  std::map<MetricName, double> confident_vs_llm;

  /// Recomputes every derived field from `cells`.
  void summarize();
  const AccuracyCell* find(PipelineKind kind, std::span<const std::size_t> models,
                           std::optional<MetricName> metric) const;
};

/// Groups results by (pipeline, model subset, metric) and counts correct final
/// answers. Throws InputError when a result has no gold item.
AccuracyReport aggregate(std::span<const QuestionResult> results,
                         const std::map<std::string, QAItem>& gold);

nlohmann::json to_json(const AccuracyReport& report);
AccuracyReport report_from_json(const nlohmann::json& doc);

/// Aligned-text rendering of the three tables.
std::string render_tables(const AccuracyReport& report);

struct ScoredOutcome {
  double oriented = 0.0;
  bool correct = false;
};

struct CdfPoint {
  double threshold = 0.0;
  double raw_cdf = 0.0;
  double smoothed_cdf = 0.0;
};

/// Empirical CDF of oriented confidence scores, one point per distinct score.
/// The smoothed series spreads each CDF increment over neighbouring grid points
/// with a Gaussian kernel of `sigma_steps` grid steps, renormalised at the
/// edges so total mass is conserved (0 disables smoothing).
/// Throws InputError on empty input.
std::vector<CdfPoint> cdf_report(std::span<const ScoredOutcome> outcomes, double sigma_steps = 1.0);

/// Accuracy among outcomes whose score is at or below each threshold.
std::vector<double> cumulative_accuracy(std::span<const ScoredOutcome> outcomes,
                                        std::span<const CdfPoint> points);

/// "threshold,raw_cdf,smoothed_cdf" CSV with round-trip precision.
std::string format_cdf_csv(std::span<const CdfPoint> points);
std::vector<CdfPoint> parse_cdf_csv(std::string_view text);

}  // namespace confrag
