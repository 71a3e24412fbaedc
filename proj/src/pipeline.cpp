#include "confrag/pipeline.hpp"

#include "confrag/errors.hpp"
#include "confrag/selection.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <future>
#include <set>

namespace confrag {
namespace {

template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const TransportError& e) {
    throw StageError(stage, e.what(), true);
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::vector<Chunk> chunks_for(const Corpus& corpus, std::span<const std::string> ids) {
  std::vector<Chunk> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    out.push_back(corpus.get(id));
  }
  return out;
}

}  // namespace

std::string_view to_string(PipelineKind kind) {
  switch (kind) {
    case PipelineKind::llm:
      return "llm";
    case PipelineKind::vanilla:
      return "vanilla";
    case PipelineKind::mixture:
      return "mixture";
    case PipelineKind::confident:
      return "confident";
  }
  return "unknown";
}

PipelineKind parse_pipeline(std::string_view text) {
  for (const auto kind : {PipelineKind::llm, PipelineKind::vanilla, PipelineKind::mixture,
                          PipelineKind::confident}) {
    if (to_string(kind) == text) {
      return kind;
    }
  }
  throw InputError("unknown pipeline '" + std::string(text) +
                   "' (expected llm, vanilla, mixture or confident)");
}

std::string combination_label(std::span<const std::size_t> models) {
  std::string label;
  for (const auto m : models) {
    if (!label.empty()) {
      label += ',';
    }
    label += std::to_string(m + 1);
  }
  return label;
}

std::vector<std::vector<std::size_t>> enumerate_combinations(std::size_t n,
                                                             std::span<const std::size_t> sizes) {
  std::vector<std::vector<std::size_t>> out;
  std::set<std::size_t> wanted(sizes.begin(), sizes.end());
  for (const auto size : wanted) {
    if (size == 0 || size > n) {
      continue;
    }
    // Lexicographic walk over index vectors of length `size`.
    std::vector<std::size_t> combo(size);
    for (std::size_t i = 0; i < size; ++i) {
      combo[i] = i;
    }
    while (true) {
      out.push_back(combo);
      std::size_t pos = size;
      while (pos > 0 && combo[pos - 1] == n - size + pos - 1) {
        --pos;
      }
      if (pos == 0) {
        break;
      }
      ++combo[pos - 1];
      for (std::size_t i = pos; i < size; ++i) {
        combo[i] = combo[i - 1] + 1;
      }
    }
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view question_id) {
  return fnv1a64(question_id, 1469598103934665603ULL ^ (master * 0x9e3779b97f4a7c15ULL));
}

Engine::Engine(const Corpus& corpus, std::vector<std::shared_ptr<const EmbeddingProvider>> providers,
               std::shared_ptr<const LlmBackend> backend, PromptTemplate prompt_template,
               PipelineConfig config)
    : corpus_(&corpus),
      providers_(std::move(providers)),
      backend_(std::move(backend)),
      template_(std::move(prompt_template)),
      config_(std::move(config)) {
  if (!backend_) {
    throw InputError("engine needs an LLM backend");
  }
  for (const auto& provider : providers_) {
    if (!provider) {
      throw InputError("engine got a null embedding provider");
    }
  }
  if (!corpus_->empty() && config_.budget.total() > 0) {
    for (const auto& provider : providers_) {
      indexes_.push_back(in_stage("embedding", [&] {
        return std::make_unique<ChunkIndex>(*provider, *corpus_);
      }));
    }
  }
}

std::vector<std::size_t> Engine::checked_models(std::span<const std::size_t> models) const {
  std::vector<std::size_t> sorted(models.begin(), models.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InputError("model subset lists a model twice");
  }
  for (const auto m : sorted) {
    if (m >= providers_.size()) {
      throw InputError("model index " + std::to_string(m + 1) + " is not declared");
    }
  }
  return sorted;
}

GenerationRecord Engine::generate_scored(const Question& question,
                                         std::span<const std::size_t> models,
                                         std::span<const Chunk> references) const {
  const auto prompt = in_stage("prompt", [&] { return assemble_prompt(template_, question.text, references); });
  auto params = config_.decode;
  params.seed = derive_seed(config_.master_seed, question.id);
  auto record = in_stage("generation", [&] { return generate(*backend_, prompt, params); });
  record.question_id = question.id;
  record.combination = combination_label(models);
  if (models.size() == 1) {
    record.embedding_model_index = models.front();
  }
  in_stage("confidence", [&] { score_confidence(record); });
  return record;
}

QuestionResult Engine::run_llm(const Question& question) const {
  QuestionResult result;
  result.question_id = question.id;
  result.kind = PipelineKind::llm;
  result.metric = config_.metric;
  result.records.push_back(generate_scored(question, {}, {}));
  result.final_answer = result.records.front().completion;
  return result;
}

QuestionResult Engine::run_vanilla(const Question& question, std::size_t model_index) const {
  const std::vector<std::size_t> models{model_index};
  checked_models(models);

  QuestionResult result;
  result.question_id = question.id;
  result.kind = PipelineKind::vanilla;
  result.models = models;
  result.metric = config_.metric;

  std::vector<std::string> ids;
  if (config_.budget.total() > 0) {
    ids = in_stage("retrieval", [&] {
      if (indexes_.empty()) {
        throw InputError("corpus is empty");
      }
      const auto row = score_all(*indexes_[model_index], question.id, question.text);
      return select_top(row, config_.budget);
    });
  }
  const auto references = chunks_for(*corpus_, ids);
  result.retrieved.emplace(model_index, std::move(ids));
  result.records.push_back(generate_scored(question, models, references));
  result.final_answer = result.records.front().completion;
  return result;
}

QuestionResult Engine::run_mixture(const Question& question,
                                   std::span<const std::size_t> models) const {
  const auto sorted = checked_models(models);
  if (sorted.empty()) {
    throw InputError("mixture needs at least one embedding model");
  }

  QuestionResult result;
  result.question_id = question.id;
  result.kind = PipelineKind::mixture;
  result.models = sorted;
  result.metric = config_.metric;

  std::vector<std::string> ids;
  if (config_.budget.total() > 0) {
    result.fused = in_stage("retrieval", [&] {
      if (indexes_.empty()) {
        throw InputError("corpus is empty");
      }
      std::vector<SimilarityRow> rows;
      rows.reserve(sorted.size());
      for (const auto m : sorted) {
        rows.push_back(score_all(*indexes_[m], question.id, question.text));
      }
      auto fused = fuse(rows, config_.budget);
      // fuse() numbers models by row position; map back to declared indices.
      for (auto& candidate : fused) {
        candidate.model_index = sorted[candidate.model_index];
      }
      return fused;
    });
    for (const auto& candidate : result.fused) {
      ids.push_back(candidate.chunk_id);
    }
  }
  const auto references = chunks_for(*corpus_, ids);
  result.records.push_back(generate_scored(question, sorted, references));
  result.final_answer = result.records.front().completion;
  return result;
}

QuestionResult Engine::run_confident(const Question& question,
                                     std::span<const std::size_t> models) const {
  const auto sorted = checked_models(models);
  if (sorted.empty()) {
    throw InputError("confident mode needs at least one embedding model");
  }

  std::vector<std::future<QuestionResult>> pending;
  std::vector<QuestionResult> runs;
  std::vector<DroppedRecord> dropped;
  const auto launch = config_.parallel_fanout ? std::launch::async : std::launch::deferred;
  for (const auto m : sorted) {
    pending.push_back(std::async(launch, [this, &question, m] { return run_vanilla(question, m); }));
  }
  for (std::size_t i = 0; i < pending.size(); ++i) {
    try {
      runs.push_back(pending[i].get());
    } catch (const StageError& e) {
      if (!e.transient()) {
        throw;
      }
      spdlog::warn("question {}: dropping model {} ({})", question.id, sorted[i] + 1, e.what());
      dropped.push_back(DroppedRecord{.model_index = sorted[i], .error = e.what()});
    }
  }
  if (runs.empty()) {
    throw StageError("generation", "all " + std::to_string(sorted.size()) +
                                       " generations failed for question '" + question.id + "'");
  }
  auto result = select_confident(question, runs, config_.metric);
  result.models = sorted;
  result.dropped = std::move(dropped);
  return result;
}

QuestionResult Engine::select_confident(const Question& question,
                                        std::span<const QuestionResult> vanilla_runs,
                                        MetricName metric) const {
  QuestionResult result;
  result.question_id = question.id;
  result.kind = PipelineKind::confident;
  result.metric = metric;
  for (const auto& run : vanilla_runs) {
    if (run.kind != PipelineKind::vanilla || run.records.size() != 1 || run.models.size() != 1) {
      throw InputError("select_confident expects single-model vanilla runs");
    }
    result.models.push_back(run.models.front());
    result.records.push_back(run.records.front());
    for (const auto& [model, ids] : run.retrieved) {
      result.retrieved[model] = ids;
    }
  }
  // Merge in model-index order so the outcome never depends on input order.
  std::vector<std::size_t> order(result.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return result.models[a] < result.models[b]; });
  std::vector<GenerationRecord> records;
  std::vector<std::size_t> models;
  for (const auto i : order) {
    records.push_back(std::move(result.records[i]));
    models.push_back(result.models[i]);
  }
  result.records = std::move(records);
  result.models = std::move(models);

  const auto selection = in_stage("confidence", [&] { return select_most_confident(result.records, metric); });
  result.winner = selection.index;
  result.winner_model_index = selection.record->embedding_model_index;
  result.final_answer = selection.record->completion;
  return result;
}

}  // namespace confrag
