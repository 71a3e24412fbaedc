#pragma once

#include "confrag/confidence.hpp"
#include "confrag/generation.hpp"

#include <cstddef>
#include <span>

namespace confrag {

struct Selection {
  const GenerationRecord* record = nullptr;
  std::size_t index = 0;
};

/// The record with the greatest oriented score under `metric`; ties go to the
/// lowest embedding-model index. Throws InputError on an empty list or a
/// record without that score.
Selection select_most_confident(std::span<const GenerationRecord> records, MetricName metric);

}  // namespace confrag
