#pragma once

#include "confrag/eval.hpp"
#include "confrag/pipeline.hpp"

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace confrag {

struct SweepOutput {
  /// Question-major; within a question: llm, vanilla per model, mixture per
  /// combination, then confident per combination and metric.
  std::vector<QuestionResult> results;
  std::vector<DroppedEntry> dropped;
};

/// Runs every pipeline for every question. Questions are spread over
/// `concurrency` worker threads; the output order does not depend on it.
SweepOutput run_sweep(const Engine& engine, std::span<const QAItem> questions,
                      const std::vector<std::vector<std::size_t>>& combinations,
                      std::size_t concurrency);

/// Entry point of the `confrag` tool. `args` excludes the program name.
/// Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace confrag
