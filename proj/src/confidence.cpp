#include "confrag/confidence.hpp"

#include "confrag/errors.hpp"
#include "confrag/selection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace confrag {

void validate_step(const TokenStep& step) {
  if (step.dist.empty()) {
    throw ContractError("token step has an empty distribution");
  }
  if (step.vocab_size < step.dist.size()) {
    throw ContractError("token step lists " + std::to_string(step.dist.size()) +
                        " tokens but vocabulary size is " + std::to_string(step.vocab_size));
  }
  if (!(step.chosen_prob > 0.0 && step.chosen_prob <= 1.0)) {
    throw ContractError("chosen-token probability outside (0, 1]");
  }
  double mass = 0.0;
  bool chosen_listed = false;
  for (std::size_t i = 0; i < step.dist.size(); ++i) {
    const auto& entry = step.dist[i];
    if (!(entry.prob > 0.0 && entry.prob <= 1.0)) {
      throw ContractError("distribution probability outside (0, 1]");
    }
    if (i > 0 && entry.prob > step.dist[i - 1].prob) {
      throw ContractError("distribution is not sorted by descending probability");
    }
    chosen_listed = chosen_listed || entry.token == step.token;
    mass += entry.prob;
  }
  if (!chosen_listed) {
    throw ContractError("chosen token '" + step.token + "' missing from its distribution");
  }
  if (!(step.tail_mass >= 0.0) || std::abs(mass + step.tail_mass - 1.0) > kStepMassTolerance) {
    throw ContractError("token step mass does not sum to one");
  }
}

namespace {

void require_steps(std::span<const TokenStep> steps) {
  if (steps.empty()) {
    throw InputError("confidence metric over an empty step list");
  }
  for (const auto& step : steps) {
    if (step.vocab_size < step.dist.size() || step.vocab_size == 0) {
      throw ContractError("token step lists more tokens than its vocabulary holds");
    }
  }
}

double floored_log(double p) { return std::log(std::max(p, kProbabilityFloor)); }

// Probability assigned to each unlisted token, and how many there are.
struct Tail {
  std::size_t count;
  double each;
};

Tail tail_of(const TokenStep& step) {
  const auto count = step.vocab_size - step.dist.size();
  if (count == 0) {
    return {0, 0.0};
  }
  return {count, std::max(step.tail_mass, 0.0) / static_cast<double>(count)};
}

double step_entropy(const TokenStep& step) {
  double h = 0.0;
  for (const auto& entry : step.dist) {
    h -= entry.prob * floored_log(entry.prob);
  }
  const auto tail = tail_of(step);
  if (tail.count > 0) {
    h -= static_cast<double>(tail.count) * tail.each * floored_log(tail.each);
  }
  return h;
}

template <typename PerStep>
double mean_over(std::span<const TokenStep> steps, PerStep per_step) {
  require_steps(steps);
  double sum = 0.0;
  for (const auto& step : steps) {
    sum += per_step(step);
  }
  return sum / static_cast<double>(steps.size());
}

}  // namespace

double avg_log_p(std::span<const TokenStep> steps) {
  return mean_over(steps, [](const TokenStep& s) { return floored_log(s.chosen_prob); });
}

double gini(std::span<const TokenStep> steps) {
  return mean_over(steps, [](const TokenStep& s) {
    double sum = 0.0;
    for (const auto& entry : s.dist) {
      sum += entry.prob * entry.prob;
    }
    const auto tail = tail_of(s);
    return sum + static_cast<double>(tail.count) * tail.each * tail.each;
  });
}

double entropy(std::span<const TokenStep> steps) { return mean_over(steps, step_entropy); }

double dp(std::span<const TokenStep> steps) {
  return mean_over(steps, [](const TokenStep& s) { return std::exp(step_entropy(s)); });
}

double self_certainty(std::span<const TokenStep> steps) {
  return mean_over(steps, [](const TokenStep& s) {
    const auto v = static_cast<double>(s.vocab_size);
    double sum = 0.0;
    for (const auto& entry : s.dist) {
      sum += std::log(v) + floored_log(entry.prob);
    }
    const auto tail = tail_of(s);
    if (tail.count > 0) {
      sum += static_cast<double>(tail.count) * (std::log(v) + floored_log(tail.each));
    }
    return -sum / v;
  });
}

double compute_metric(MetricName metric, std::span<const TokenStep> steps) {
  switch (metric) {
    case MetricName::avg_log_p:
      return avg_log_p(steps);
    case MetricName::self_certainty:
      return self_certainty(steps);
    case MetricName::gini:
      return gini(steps);
    case MetricName::entropy:
      return entropy(steps);
    case MetricName::dp:
      return dp(steps);
  }
  throw InputError("unknown metric");
}

std::string_view to_string(MetricName metric) {
  switch (metric) {
    case MetricName::avg_log_p:
      return "avg-log-p";
    case MetricName::self_certainty:
      return "self-certainty";
    case MetricName::gini:
      return "gini";
    case MetricName::entropy:
      return "entropy";
    case MetricName::dp:
      return "dp";
  }
  return "unknown";
}

MetricName parse_metric(std::string_view text) {
  for (const auto metric : kAllMetrics) {
    if (to_string(metric) == text) {
      return metric;
    }
  }
  throw InputError("unknown metric '" + std::string(text) +
                   "' (expected avg-log-p, self-certainty, gini, entropy or dp)");
}

Orientation orientation_of(MetricName metric) {
  return metric == MetricName::entropy || metric == MetricName::dp
             ? Orientation::lower_is_confident
             : Orientation::higher_is_confident;
}

ConfidenceScore orient(MetricName metric, double raw) {
  if (!std::isfinite(raw)) {
    throw InputError("cannot orient a non-finite " + std::string(to_string(metric)) + " score");
  }
  const double oriented = orientation_of(metric) == Orientation::lower_is_confident ? -raw : raw;
  return ConfidenceScore{.metric = metric, .raw = raw, .oriented = oriented};
}

std::map<MetricName, ConfidenceScore> score_all_metrics(std::span<const TokenStep> steps) {
  std::map<MetricName, ConfidenceScore> scores;
  for (const auto metric : kAllMetrics) {
    scores.emplace(metric, orient(metric, compute_metric(metric, steps)));
  }
  return scores;
}

Selection select_most_confident(std::span<const GenerationRecord> records, MetricName metric) {
  if (records.empty()) {
    throw InputError("select_most_confident: no records");
  }
  std::optional<std::size_t> best;
  double best_score = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto it = records[i].confidence.find(metric);
    if (it == records[i].confidence.end()) {
      throw InputError("select_most_confident: record " + std::to_string(i) + " has no " +
                       std::string(to_string(metric)) + " score");
    }
    const double score = it->second.oriented;
    if (!best || score > best_score ||
        (score == best_score &&
         records[i].embedding_model_index < records[*best].embedding_model_index)) {
      best = i;
      best_score = score;
    }
  }
  return Selection{.record = &records[*best], .index = *best};
}

}  // namespace confrag
