#pragma once

#include "confrag/confidence.hpp"
#include "confrag/http.hpp"
#include "confrag/token_step.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace confrag {

/// Whether backends report the whole next-token distribution or only its top K.
enum class DistributionMode { full, truncated };

std::string_view to_string(DistributionMode mode);

struct DecodeParams {
  double temperature = 0.0;
  int max_tokens = 512;
  /// Per-call seed. The pipeline derives one per (question, model set).
  std::uint64_t seed = 0;
};

struct Generation {
  std::string completion;
  std::vector<TokenStep> steps;
};

/// A chat model f(). Implementations must be safe for concurrent calls.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;

  /// Human-readable identity recorded in manifests.
  virtual std::string identity() const = 0;
  virtual DistributionMode distribution_mode() const = 0;
  /// |v| used to complete truncated distributions.
  virtual std::size_t vocab_size() const = 0;

  virtual Generation generate(const std::string& prompt, const DecodeParams& params) const = 0;
};

struct GenerationRecord {
  std::string question_id;
  /// 1-based model indices joined by commas ("1,3"); empty for the bare LLM.
  std::string combination;
  /// Declared index of the embedding model that retrieved the references, when
  /// exactly one did.
  std::optional<std::size_t> embedding_model_index;
  std::string prompt;
  std::string completion;
  std::vector<TokenStep> steps;
  std::map<MetricName, ConfidenceScore> confidence;
};

/// Calls the backend and checks its output: every step valid, at least one step,
/// non-empty completion. Throws ContractError on violations; transport errors
/// propagate. Confidence is left empty.
GenerationRecord generate(const LlmBackend& backend, const std::string& prompt,
                          const DecodeParams& params);

/// Fills `record.confidence` with all five metrics.
void score_confidence(GenerationRecord& record);

/// Produces the steps of one completion from a seed and the prompt text.
using MockScript = std::function<std::vector<TokenStep>(std::uint64_t seed, std::string_view prompt)>;

/// Offline backend with exact full-vocabulary distributions. Output is a pure
/// function of (backend seed, call seed, prompt).
class MockBackend final : public LlmBackend {
 public:
  explicit MockBackend(std::uint64_t seed);
  MockBackend(std::uint64_t seed, MockScript script, std::size_t vocab_size);

  std::string identity() const override;
  DistributionMode distribution_mode() const override { return DistributionMode::full; }
  std::size_t vocab_size() const override { return vocab_size_; }
  Generation generate(const std::string& prompt, const DecodeParams& params) const override;

  /// Vocabulary of the default script.
  static const std::vector<std::string>& default_vocabulary();
  /// Default script: a few filler words, then "#### <answer>". When the prompt
  /// holds a "#### N" marker (a retrieved worked solution) the answer is N and
  /// the distributions are sharp; otherwise the answer is a number picked from
  /// the prompt and the distributions are flatter.
  static std::vector<TokenStep> default_script(std::uint64_t seed, std::string_view prompt);

 private:
  std::uint64_t seed_;
  MockScript script_;
  std::size_t vocab_size_;
};

struct RemoteChatSettings {
  HttpSettings http;
  std::string model;
  /// K in the top_logprobs request field.
  int top_logprobs = 20;
  std::size_t vocab_size = 32'000;
};

/// OpenAI-compatible chat client: POST /v1/chat/completions with logprobs.
class RemoteChatBackend final : public LlmBackend {
 public:
  explicit RemoteChatBackend(RemoteChatSettings settings);

  std::string identity() const override;
  DistributionMode distribution_mode() const override { return DistributionMode::truncated; }
  std::size_t vocab_size() const override { return settings_.vocab_size; }
  Generation generate(const std::string& prompt, const DecodeParams& params) const override;

  /// Decodes a chat-completions response body. Throws LogprobsMissingError
  /// when per-token data is absent and ContractError for other defects.
  static Generation parse_response(const nlohmann::json& body, std::size_t vocab_size);

 private:
  RemoteChatSettings settings_;
  JsonHttpClient client_;
};

}  // namespace confrag
