#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace confrag {

struct TokenProb {
  std::string token;
  double prob = 0.0;
};

/// One autoregressive step: the emitted token, its probability, and the
/// (possibly top-K truncated) next-token distribution it was drawn from.
/// `tail_mass` is the probability left to the `vocab_size - dist.size()`
/// tokens that are not listed.
struct TokenStep {
  std::string token;
  double chosen_prob = 1.0;
  /// Sorted by descending probability.
  std::vector<TokenProb> dist;
  double tail_mass = 0.0;
  std::size_t vocab_size = 1;
};

inline constexpr double kStepMassTolerance = 1e-6;

/// Throws ContractError when a step breaks its invariants: probabilities in
/// (0, 1], listed mass plus tail within 1e-6 of one, chosen token listed,
/// descending order, and vocab_size no smaller than the listed count.
void validate_step(const TokenStep& step);

}  // namespace confrag
