#include "confrag/retrieval.hpp"

#include "confrag/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace confrag {
namespace {

bool better_entry(const ScoredChunk& a, const ScoredChunk& b) {
  if (a.score != b.score) {
    return a.score > b.score;
  }
  return a.ordinal < b.ordinal;
}

std::vector<const ScoredChunk*> sorted_entries(const SimilarityRow& row) {
  std::vector<const ScoredChunk*> order;
  order.reserve(row.entries.size());
  for (const auto& e : row.entries) {
    order.push_back(&e);
  }
  std::sort(order.begin(), order.end(),
            [](const ScoredChunk* a, const ScoredChunk* b) { return better_entry(*a, *b); });
  return order;
}

// Walks a best-first sequence and keeps items while the budget allows.
template <typename Item, typename KindOf>
std::vector<Item> apply_budget(std::vector<Item> ordered, const RetrievalBudget& budget,
                               KindOf kind_of) {
  if (!budget.uses_quotas()) {
    if (ordered.size() > budget.k) {
      ordered.resize(budget.k);
    }
    return ordered;
  }
  std::map<ChunkKind, std::size_t> taken;
  std::vector<Item> kept;
  for (auto& item : ordered) {
    const auto kind = kind_of(item);
    const auto quota = budget.quotas.find(kind);
    if (quota == budget.quotas.end() || taken[kind] >= quota->second) {
      continue;
    }
    ++taken[kind];
    kept.push_back(std::move(item));
  }
  return kept;
}

}  // namespace

std::size_t RetrievalBudget::total() const noexcept {
  if (!uses_quotas()) {
    return k;
  }
  std::size_t sum = 0;
  for (const auto& [kind, count] : quotas) {
    sum += count;
  }
  return sum;
}

ChunkIndex::ChunkIndex(const EmbeddingProvider& provider, const Corpus& corpus,
                       std::size_t batch_size)
    : provider_(&provider), corpus_(&corpus) {
  const auto& chunks = corpus.chunks();
  vectors_.reserve(chunks.size());
  batch_size = std::max<std::size_t>(batch_size, 1);
  std::vector<std::string> batch;
  for (std::size_t begin = 0; begin < chunks.size(); begin += batch_size) {
    const auto end = std::min(chunks.size(), begin + batch_size);
    batch.clear();
    for (std::size_t i = begin; i < end; ++i) {
      batch.push_back(chunks[i].text);
    }
    auto vectors = provider.embed(batch);
    validate_embedding_batch(vectors, batch.size());
    if (!vectors_.empty() && vectors.front().dimension() != vectors_.front().dimension()) {
      throw DimensionMismatchError("dimension mismatch across batches from '" + provider.model_id() + "'");
    }
    for (auto& v : vectors) {
      vectors_.push_back(std::move(v));
    }
  }
}

namespace {

SimilarityRow score_with(const EmbeddingProvider& provider, std::string question_id,
                         const std::string& question, const Corpus& corpus,
                         std::optional<ChunkKind> kind_filter,
                         std::span<const EmbeddingVector> cached) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!kind_filter || corpus.chunks()[i].kind == *kind_filter) {
      eligible.push_back(i);
    }
  }
  if (eligible.empty()) {
    throw InputError("score_all: no eligible chunks in corpus");
  }

  const std::vector<std::string> question_batch{question};
  const auto question_vec = provider.embed(question_batch);
  validate_embedding_batch(question_vec, 1);

  std::vector<EmbeddingVector> fresh;
  if (cached.empty()) {
    std::vector<std::string> texts;
    texts.reserve(eligible.size());
    for (const auto i : eligible) {
      texts.push_back(corpus.chunks()[i].text);
    }
    fresh = provider.embed(texts);
    validate_embedding_batch(fresh, texts.size());
  }

  SimilarityRow row{.model_id = provider.model_id(), .question_id = std::move(question_id),
                    .entries = {}};
  row.entries.reserve(eligible.size());
  for (std::size_t j = 0; j < eligible.size(); ++j) {
    const auto ordinal = eligible[j];
    const auto& chunk = corpus.chunks()[ordinal];
    const auto& vec = cached.empty() ? fresh[j] : cached[ordinal];
    row.entries.push_back(ScoredChunk{.chunk_id = chunk.id,
                                      .ordinal = ordinal,
                                      .kind = chunk.kind,
                                      .score = cosine(question_vec.front(), vec)});
  }
  return row;
}

}  // namespace

SimilarityRow score_all(const EmbeddingProvider& provider, std::string question_id,
                        const std::string& question, const Corpus& corpus,
                        std::optional<ChunkKind> kind_filter) {
  return score_with(provider, std::move(question_id), question, corpus, kind_filter, {});
}

SimilarityRow score_all(const ChunkIndex& index, std::string question_id,
                        const std::string& question, std::optional<ChunkKind> kind_filter) {
  if (index.corpus().empty()) {
    throw InputError("score_all: no eligible chunks in corpus");
  }
  return score_with(index.provider(), std::move(question_id), question, index.corpus(),
                    kind_filter, index.vectors());
}

std::vector<std::string> top_k(const SimilarityRow& row, std::size_t k) {
  return select_top(row, RetrievalBudget{.k = k, .quotas = {}});
}

std::vector<std::string> select_top(const SimilarityRow& row, const RetrievalBudget& budget) {
  auto kept = apply_budget(sorted_entries(row), budget,
                           [](const ScoredChunk* e) { return e->kind; });
  std::vector<std::string> ids;
  ids.reserve(kept.size());
  for (const auto* e : kept) {
    ids.push_back(e->chunk_id);
  }
  return ids;
}

std::vector<double> standardize(std::span<const double> scores) {
  std::vector<double> out(scores.size(), 0.0);
  // A constant row has sigma = 0 exactly; the summed mean may still be off by an ulp.
  if (scores.empty() || std::all_of(scores.begin(), scores.end(), [&](double w) { return w == scores.front(); })) {
    return out;
  }
  const auto m = static_cast<double>(scores.size());
  double sum = 0.0;
  for (const double w : scores) {
    sum += w;
  }
  const double mean = sum / m;
  double sq = 0.0;
  for (const double w : scores) {
    sq += (w - mean) * (w - mean);
  }
  const double sigma = std::sqrt(sq / m);
  if (!(sigma > 0.0)) {
    return out;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = (scores[i] - mean) / sigma;
  }
  return out;
}

SimilarityRow standardize(const SimilarityRow& row) {
  std::vector<double> raw;
  raw.reserve(row.entries.size());
  for (const auto& e : row.entries) {
    raw.push_back(e.score);
  }
  const auto z = standardize(raw);
  SimilarityRow out = row;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out.entries[i].score = z[i];
  }
  return out;
}

std::vector<RetrievalCandidate> fuse(std::span<const SimilarityRow> rows,
                                     const RetrievalBudget& budget) {
  std::vector<SimilarityRow> standardized;
  standardized.reserve(rows.size());
  for (const auto& row : rows) {
    standardized.push_back(standardize(row));
  }
  return fuse_standardized(rows, standardized, budget);
}

std::vector<RetrievalCandidate> fuse_standardized(std::span<const SimilarityRow> raw,
                                                  std::span<const SimilarityRow> standardized,
                                                  const RetrievalBudget& budget) {
  if (raw.empty()) {
    throw InputError("fuse: no similarity rows");
  }
  if (raw.size() != standardized.size()) {
    throw InputError("fuse: raw and standardized row counts differ");
  }

  struct Seen {
    std::size_t ordinal;
    ChunkKind kind;
  };
  std::unordered_map<std::string, Seen> layout;
  std::unordered_map<std::string, RetrievalCandidate> best;

  for (std::size_t model = 0; model < raw.size(); ++model) {
    const auto& raw_row = raw[model];
    const auto& z_row = standardized[model];
    if (raw_row.entries.size() != z_row.entries.size()) {
      throw InputError("fuse: raw and standardized rows are not aligned");
    }
    const auto ranked = sorted_entries(z_row);
    std::unordered_map<const ScoredChunk*, std::size_t> rank;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      rank.emplace(ranked[r], r + 1);
    }

    for (std::size_t j = 0; j < z_row.entries.size(); ++j) {
      const auto& entry = z_row.entries[j];
      if (raw_row.entries[j].chunk_id != entry.chunk_id) {
        throw InputError("fuse: raw and standardized rows are not aligned");
      }
      if (!std::isfinite(entry.score)) {
        throw InputError("fuse: non-finite standardized score for '" + entry.chunk_id + "'");
      }
      const auto [slot, inserted] = layout.try_emplace(entry.chunk_id, Seen{entry.ordinal, entry.kind});
      if (!inserted && (slot->second.ordinal != entry.ordinal || slot->second.kind != entry.kind)) {
        throw InputError("fuse: rows over mismatched corpora (chunk '" + entry.chunk_id + "')");
      }

      RetrievalCandidate candidate{.model_id = z_row.model_id,
                                   .model_index = model,
                                   .chunk_id = entry.chunk_id,
                                   .ordinal = entry.ordinal,
                                   .kind = entry.kind,
                                   .raw = raw_row.entries[j].score,
                                   .standardized = entry.score,
                                   .rank_within_model = rank.at(&entry)};
      auto existing = best.find(entry.chunk_id);
      if (existing == best.end()) {
        best.emplace(entry.chunk_id, std::move(candidate));
      } else if (candidate.standardized > existing->second.standardized) {
        // Models are visited in index order, so an equal score keeps the lower index.
        existing->second = std::move(candidate);
      }
    }
  }

  std::vector<RetrievalCandidate> pooled;
  pooled.reserve(best.size());
  for (auto& [id, candidate] : best) {
    pooled.push_back(std::move(candidate));
  }
  std::sort(pooled.begin(), pooled.end(), [](const auto& a, const auto& b) {
    if (a.standardized != b.standardized) {
      return a.standardized > b.standardized;
    }
    if (a.ordinal != b.ordinal) {
      return a.ordinal < b.ordinal;
    }
    return a.model_index < b.model_index;
  });
  return apply_budget(std::move(pooled), budget,
                      [](const RetrievalCandidate& c) { return c.kind; });
}

// ---------------------------------------------------------------------------
// Prompt templates

namespace {

constexpr std::string_view kQuestionTag = "{{question}}";
constexpr std::string_view kReferencesTag = "{{references}}";
constexpr std::string_view kSectionBeginTag = "{{#references}}";
constexpr std::string_view kSectionEndTag = "{{/references}}";

std::string format_reference(std::string_view format, std::size_t number, std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < format.size();) {
    if (format.substr(i, 3) == "{n}") {
      out += std::to_string(number);
      i += 3;
    } else if (format.substr(i, 6) == "{text}") {
      out += text;
      i += 6;
    } else {
      out += format[i++];
    }
  }
  return out;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string text, std::string reference_format)
    : text_(std::move(text)), reference_format_(std::move(reference_format)) {
  if (reference_format_.find("{text}") == std::string::npos) {
    throw InputError("prompt template: reference format must contain {text}");
  }
  int questions = 0;
  int references = 0;
  bool in_section = false;
  std::string literal;
  auto flush = [&] {
    if (!literal.empty()) {
      segments_.push_back({Part::literal, std::move(literal)});
      literal.clear();
    }
  };
  const std::string_view view = text_;
  for (std::size_t i = 0; i < view.size();) {
    const auto rest = view.substr(i);
    if (rest.starts_with(kQuestionTag)) {
      if (in_section) {
        throw InputError("prompt template: {{question}} may not sit inside the references section");
      }
      flush();
      segments_.push_back({Part::question, {}});
      ++questions;
      i += kQuestionTag.size();
    } else if (rest.starts_with(kReferencesTag)) {
      flush();
      segments_.push_back({Part::references, {}});
      ++references;
      i += kReferencesTag.size();
    } else if (rest.starts_with(kSectionBeginTag)) {
      if (in_section) {
        throw InputError("prompt template: nested references section");
      }
      flush();
      segments_.push_back({Part::section_begin, {}});
      in_section = true;
      i += kSectionBeginTag.size();
    } else if (rest.starts_with(kSectionEndTag)) {
      if (!in_section) {
        throw InputError("prompt template: unmatched {{/references}}");
      }
      flush();
      segments_.push_back({Part::section_end, {}});
      in_section = false;
      i += kSectionEndTag.size();
    } else {
      literal += view[i++];
    }
  }
  flush();
  if (in_section) {
    throw InputError("prompt template: unterminated {{#references}} section");
  }
  if (questions != 1) {
    throw InputError("prompt template: {{question}} must appear exactly once");
  }
  if (references != 1) {
    throw InputError("prompt template: {{references}} must appear exactly once");
  }
}

const std::string& PromptTemplate::builtin_text() {
  static const std::string kText =
      "{{#references}}Reference material:\n"
      "\n"
      "{{references}}\n"
      "\n"
      "{{/references}}Question: {{question}}\n"
      "Solve the problem step by step. End your response with \"#### \" followed by the "
      "final numeric answer.\n";
  return kText;
}

PromptTemplate PromptTemplate::builtin() { return PromptTemplate(builtin_text()); }

PromptTemplate PromptTemplate::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot read prompt template '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return PromptTemplate(buffer.str());
}

std::string PromptTemplate::render(std::string_view question,
                                   std::span<const Chunk> references) const {
  std::string out;
  bool skipping = false;
  for (const auto& segment : segments_) {
    switch (segment.part) {
      case Part::section_begin:
        skipping = references.empty();
        break;
      case Part::section_end:
        skipping = false;
        break;
      case Part::literal:
        if (!skipping) {
          out += segment.literal;
        }
        break;
      case Part::question:
        out += question;
        break;
      case Part::references:
        if (!skipping) {
          for (std::size_t i = 0; i < references.size(); ++i) {
            if (i > 0) {
              out += "\n\n";
            }
            out += format_reference(reference_format_, i + 1, references[i].text);
          }
        }
        break;
    }
  }
  return out;
}

std::string assemble_prompt(const PromptTemplate& tmpl, std::string_view question,
                            std::span<const Chunk> references) {
  return tmpl.render(question, references);
}

}  // namespace confrag
