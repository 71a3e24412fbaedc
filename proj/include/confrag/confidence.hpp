#pragma once

#include "confrag/token_step.hpp"

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string_view>

namespace confrag {

enum class MetricName { avg_log_p, self_certainty, gini, entropy, dp };

inline constexpr std::array<MetricName, 5> kAllMetrics = {
    MetricName::avg_log_p, MetricName::self_certainty, MetricName::gini, MetricName::entropy,
    MetricName::dp};

enum class Orientation { higher_is_confident, lower_is_confident };

std::string_view to_string(MetricName metric);
/// Accepts "avg-log-p", "self-certainty", "gini", "entropy", "dp".
MetricName parse_metric(std::string_view text);
Orientation orientation_of(MetricName metric);

struct ConfidenceScore {
  MetricName metric = MetricName::self_certainty;
  double raw = 0.0;
  /// Greater always means more confident.
  double oriented = 0.0;
};

/// Floor applied to a probability before it enters a logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

// The metrics below average over every step. A truncated step is completed by
// spreading its tail mass uniformly over the unlisted vocabulary entries.
// All throw InputError on an empty step list and ContractError when a step
// lists more tokens than its vocabulary holds.

/// Mean log-probability of the emitted tokens. <= 0.
double avg_log_p(std::span<const TokenStep> steps);
/// Mean sum of squared probabilities. In [1/|v|, 1]; higher is more peaked.
double gini(std::span<const TokenStep> steps);
/// Mean Shannon entropy (nats).
double entropy(std::span<const TokenStep> steps);
/// Mean of per-step exp(entropy).
double dp(std::span<const TokenStep> steps);
/// Mean divergence from uniform: -(1/(n|v|)) sum log(|v| p).
double self_certainty(std::span<const TokenStep> steps);

double compute_metric(MetricName metric, std::span<const TokenStep> steps);

ConfidenceScore orient(MetricName metric, double raw);

std::map<MetricName, ConfidenceScore> score_all_metrics(std::span<const TokenStep> steps);

}  // namespace confrag
