// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include "confrag/cli.hpp"
#include "confrag/confidence.hpp"
#include "confrag/errors.hpp"
#include "confrag/eval.hpp"
#include "confrag/generation.hpp"
#include "confrag/pipeline.hpp"
#include "confrag/retrieval.hpp"

#include "oracles.hpp"
#include "stub_server.hpp"
#include "support.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>

using namespace confrag;
using testing_support::make_row;
using testing_support::make_step;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

struct Criterion {
  int number;
  const char* name;
  double limit_seconds;  // 0 means no runtime bound
  std::function<Outcome()> run;
};

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::vector<TokenStep> single(const std::vector<double>& p) { return {make_step(p, testing_support::argmax_index(p))}; }

// --- 1 ----------------------------------------------------------------------

Outcome metric_examples() {
  Outcome o;
  const std::vector<double> uniform4{0.25, 0.25, 0.25, 0.25};
  const std::vector<double> one_hot4{1.0, 0.0, 0.0, 0.0};
  const std::vector<double> half{0.5, 0.5, 0.0, 0.0};
  const double e1 = std::exp(-1.0);
  const double e3 = std::exp(-3.0);

  o.require(near(avg_log_p(std::vector{make_step({1.0}, 0)}), 0.0, 1e-9), "avg_log_p one-hot");
  o.require(near(avg_log_p(std::vector{make_step({0.5, 0.5}, 0), make_step({0.5, 0.5}, 1)}), -0.693147, 1e-6) &&
                near(avg_log_p(std::vector{make_step({0.5, 0.5}, 0), make_step({0.5, 0.5}, 1)}), std::log(0.5), 1e-9),
            "avg_log_p halves");
  o.require(near(avg_log_p(std::vector{make_step({e1, 1 - e1}, 0), make_step({1 - e3, e3}, 1)}), -2.0, 1e-9),
            "avg_log_p e^-1, e^-3");

  o.require(near(gini(single(one_hot4)), 1.0, 1e-8), "gini one-hot");
  o.require(near(gini(single(uniform4)), 0.25, 1e-9), "gini uniform");
  o.require(near(gini(single(half)), 0.5, 1e-8), "gini (0.5, 0.5, 0, 0)");

  o.require(near(entropy(single(one_hot4)), 0.0, 1e-8), "entropy one-hot");
  o.require(near(entropy(single(uniform4)), std::log(4.0), 1e-9) && near(entropy(single(uniform4)), 1.386294, 1e-6),
            "entropy uniform");
  o.require(near(entropy(single(half)), std::log(2.0), 1e-8), "entropy (0.5, 0.5, 0, 0)");

  o.require(near(dp(single(one_hot4)), 1.0, 1e-7), "dp one-hot");
  o.require(near(dp(single(uniform4)), 4.0, 1e-8), "dp uniform");
  o.require(near(dp(std::vector{make_step(uniform4, 0), make_step(one_hot4, 0)}), 2.5, 1e-7), "dp two steps");

  bool uniform_ok = true;
  for (const std::size_t v : {2u, 3u, 4u, 10u, 1000u}) {
    uniform_ok = uniform_ok && near(self_certainty(single(std::vector<double>(v, 1.0 / static_cast<double>(v)))), 0.0, 1e-9);
  }
  o.require(uniform_ok, "self_certainty uniform");
  o.require(near(self_certainty(single({0.97, 0.01, 0.01, 0.01})), 2.075198, 1e-6), "self_certainty 0.97");
  o.require(near(self_certainty(single({0.7, 0.1, 0.1, 0.1})), 0.429813, 1e-6), "self_certainty 0.7");
  if (o.pass) {
    o.detail = "15/15 examples";
  }
  return o;
}

// --- 2 ----------------------------------------------------------------------

Outcome dp_entropy_identities() {
  Outcome o;
  std::mt19937_64 rng(202);
  double worst_single = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t v = 2 + rng() % 200;
    const auto p = testing_support::random_distribution(rng, v, 0.3 + static_cast<double>(rng() % 8));
    const auto steps = single(p);
    const double gap = std::abs(dp(steps) - std::exp(entropy(steps)));
    worst_single = std::max(worst_single, gap);
    o.require(gap <= 1e-9, "dp != exp(entropy) on a single step");
  }
  for (int t = 0; t < 1000; ++t) {
    const std::size_t v = 2 + rng() % 100;
    std::vector<TokenStep> steps;
    for (std::size_t i = 0, n = 2 + rng() % 10; i < n; ++i) {
      const auto p = testing_support::random_distribution(rng, v, 0.3 + static_cast<double>(rng() % 8));
      steps.push_back(make_step(p, rng() % v));
    }
    o.require(dp(steps) >= std::exp(entropy(steps)) - 1e-9, "Jensen bound violated");
  }
  if (o.pass) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "max single-step gap %.2e", worst_single);
    o.detail = buf;
  }
  return o;
}

// --- 3 ----------------------------------------------------------------------

Outcome self_certainty_nonnegative() {
  Outcome o;
  std::mt19937_64 rng(303);
  double lowest = 1e300;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t v = 2 + rng() % 300;
    std::vector<TokenStep> steps;
    for (std::size_t i = 0, n = 1 + rng() % 6; i < n; ++i) {
      steps.push_back(make_step(testing_support::random_distribution(rng, v, 0.2 + static_cast<double>(rng() % 10)),
                                rng() % v));
    }
    const double sc = self_certainty(steps);
    lowest = std::min(lowest, sc);
    o.require(sc >= 0.0, "negative self-certainty");
  }
  for (std::size_t v = 1; v <= 64; ++v) {
    std::vector<TokenStep> steps;
    for (std::size_t i = 0; i < 1 + v % 5; ++i) {
      steps.push_back(make_step(std::vector<double>(v, 1.0 / static_cast<double>(v)), i % v));
    }
    o.require(near(self_certainty(steps), 0.0, 1e-9), "uniform steps not 0 (|v| = " + std::to_string(v) + ")");
  }
  if (o.pass) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "min over random inputs %.3e", lowest);
    o.detail = buf;
  }
  return o;
}

// --- 4 ----------------------------------------------------------------------

Outcome fusion_oracle() {
  Outcome o;
  std::mt19937_64 rng(404);
  std::size_t duplicates = 0;
  std::size_t ties = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t models = 1 + rng() % 4;
    const std::size_t chunks = 1 + rng() % 50;
    const std::size_t k = rng() % 9;
    std::vector<int> kinds(chunks);
    for (auto& kind : kinds) {
      kind = static_cast<int>(rng() % 2);
    }
    std::vector<std::vector<double>> raw(models, std::vector<double>(chunks));
    const int mode = t % 4;
    for (std::size_t m = 0; m < models; ++m) {
      for (auto& s : raw[m]) {
        if (mode == 0) {
          s = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        } else {
          s = static_cast<double>(rng() % (mode == 1 ? 3 : 6)) / 5.0;  // heavy within-row ties
        }
      }
    }
    if (mode == 2 && models > 1) {
      raw[models - 1] = raw[0];  // cross-model ties on every chunk
    }
    if (mode == 3) {
      std::fill(raw[0].begin(), raw[0].end(), 0.25);  // constant row, sigma = 0
    }
    std::vector<SimilarityRow> rows;
    for (std::size_t m = 0; m < models; ++m) {
      rows.push_back(make_row("m" + std::to_string(m), raw[m], kinds));
    }
    const bool quota_case = t % 5 == 4;
    std::map<int, std::size_t> quotas;
    RetrievalBudget budget{.k = k, .quotas = {}};
    if (quota_case) {
      quotas = {{1, rng() % 3}, {0, rng() % 6}};
      budget.quotas = {{ChunkKind::textbook, quotas[1]}, {ChunkKind::qa, quotas[0]}};
    }
    const auto want = oracle::fuse(raw, kinds, k, quotas);
    const auto got = fuse(rows, budget);
    duplicates += models > 1 ? 1 : 0;
    ties += mode != 0 ? 1 : 0;
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < want.size(); ++i) {
      same = got[i].chunk_id == "c" + std::to_string(want[i].chunk) && got[i].model_index == want[i].model &&
             got[i].standardized == want[i].z;
    }
    o.require(same, "mismatch on instance " + std::to_string(t));
  }
  if (o.pass) {
    o.detail = "1000 instances (" + std::to_string(duplicates) + " with duplicates, " + std::to_string(ties) +
               " with forced ties)";
  }
  return o;
}

// --- 5 ----------------------------------------------------------------------

Outcome affine_invariance() {
  Outcome o;
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> scale(0.05, 20.0);
  std::uniform_real_distribution<double> shift(-10.0, 10.0);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t models = 1 + rng() % 4;
    const std::size_t chunks = 2 + rng() % 60;
    std::vector<SimilarityRow> rows;
    std::vector<SimilarityRow> moved;
    for (std::size_t m = 0; m < models; ++m) {
      std::vector<double> w(chunks);
      for (auto& x : w) {
        x = unit(rng);
      }
      const double a = scale(rng);
      const double b = shift(rng);
      std::vector<double> w2;
      for (const double x : w) {
        w2.push_back(a * x + b);
      }
      const auto z = standardize(w);
      const auto z2 = standardize(w2);
      for (std::size_t i = 0; i < chunks; ++i) {
        worst = std::max(worst, std::abs(z[i] - z2[i]));
        o.require(std::abs(z[i] - z2[i]) <= 1e-9, "standardized scores moved on row " + std::to_string(t));
      }
      rows.push_back(make_row("m" + std::to_string(m), w));
      moved.push_back(make_row("m" + std::to_string(m), w2));
    }
    const RetrievalBudget budget{.k = 1 + rng() % 8, .quotas = {}};
    const auto f1 = fuse(rows, budget);
    const auto f2 = fuse(moved, budget);
    bool same = f1.size() == f2.size();
    for (std::size_t i = 0; same && i < f1.size(); ++i) {
      same = f1[i].chunk_id == f2[i].chunk_id && f1[i].model_index == f2[i].model_index;
    }
    o.require(same, "fuse output changed on instance " + std::to_string(t));
  }
  if (o.pass) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "max |dz| %.2e", worst);
    o.detail = buf;
  }
  return o;
}

// --- 6 ----------------------------------------------------------------------

// Provider that serves fixed vectors keyed by text.
class TableProvider final : public EmbeddingProvider {
 public:
  explicit TableProvider(std::unordered_map<std::string, std::vector<double>> table) : table_(std::move(table)) {}
  const std::string& model_id() const noexcept override { return id_; }
  std::string mode() const override { return "deterministic-test"; }
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    std::vector<EmbeddingVector> out;
    for (const auto& t : texts) {
      out.emplace_back(table_.at(t), id_);
    }
    return out;
  }

 private:
  std::string id_ = "table";
  std::unordered_map<std::string, std::vector<double>> table_;
};

Outcome retrieval_oracle() {
  Outcome o;
  std::mt19937_64 rng(606);
  std::normal_distribution<double> normal;
  std::size_t tied_instances = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = 1 + rng() % 200;
    const std::size_t d = 1 + rng() % 64;
    std::unordered_map<std::string, std::vector<double>> table;
    std::vector<std::vector<double>> vectors;
    Corpus corpus;
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> v(d);
      if (j > 0 && rng() % 4 == 0) {
        v = vectors[rng() % j];  // duplicate vector: exact score tie
      } else {
        for (auto& x : v) {
          x = normal(rng);
        }
        v[0] += 1e-3;  // keep away from the zero vector
      }
      vectors.push_back(v);
      const auto text = "chunk " + std::to_string(j);
      table[text] = v;
      corpus.add({.id = "c" + std::to_string(j), .text = text, .kind = ChunkKind::qa, .source = ""});
    }
    std::vector<double> q(d);
    for (auto& x : q) {
      x = normal(rng);
    }
    q[0] += 1e-3;
    table["question"] = q;
    const TableProvider provider(table);
    const auto row = score_all(provider, "q", "question", corpus);
    o.require(row.entries.size() == m, "row size");
    std::vector<double> scores;
    for (std::size_t j = 0; j < m; ++j) {
      scores.push_back(row.entries[j].score);
      o.require(std::abs(row.entries[j].score - oracle::dot_cosine(q, vectors[j])) <= 1e-12, "cosine mismatch");
    }
    std::set<double> distinct(scores.begin(), scores.end());
    tied_instances += distinct.size() < scores.size() ? 1 : 0;
    const std::size_t k = rng() % (m + 2);
    const auto got = top_k(row, k);
    const auto want = oracle::top_k(scores, k);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < want.size(); ++i) {
      same = got[i] == "c" + std::to_string(want[i]);
    }
    o.require(same, "top_k differs from full sort on corpus " + std::to_string(t));
  }
  if (o.pass) {
    o.detail = "1000 corpora, " + std::to_string(tied_instances) + " with exact ties";
  }
  return o;
}

// --- shared mock world for 7 and 8 -------------------------------------------

struct World {
  Corpus corpus;
  std::vector<std::shared_ptr<const EmbeddingProvider>> providers;
  std::vector<Question> questions;
};

World make_world(std::size_t question_count) {
  const auto f = testing_support::write_fixture("acceptance_world");
  World w;
  w.corpus.ingest(f.qa, ChunkKind::qa);
  w.corpus.ingest(f.textbook, ChunkKind::textbook);
  for (const auto& [id, dim] : std::vector<std::pair<std::string, std::size_t>>{
           {"hash-a", 64}, {"hash-b", 48}, {"hash-c", 32}, {"hash-d", 96}}) {
    w.providers.push_back(std::make_shared<HashEmbeddingProvider>(id, dim));
  }
  const char* nouns[] = {"apples", "pencils", "marbles", "coins", "shells", "books", "cards", "beads"};
  std::mt19937_64 rng(77);
  for (std::size_t i = 0; i < question_count; ++i) {
    const auto a = 2 + rng() % 30;
    const auto b = 2 + rng() % 12;
    const std::string noun = nouns[rng() % 8];
    w.questions.push_back(Question{.id = "q" + std::to_string(i),
                                   .text = "A crate holds " + std::to_string(a) + " " + noun + ". How many " + noun +
                                           " are in " + std::to_string(b) + " crates?"});
  }
  return w;
}

PipelineConfig pipeline_with(MetricName metric, RetrievalBudget budget = RetrievalBudget{
                                                    .k = 4, .quotas = {{ChunkKind::textbook, 1}, {ChunkKind::qa, 3}}}) {
  PipelineConfig c;
  c.metric = metric;
  c.budget = std::move(budget);
  c.master_seed = 2024;
  c.parallel_fanout = false;
  return c;
}

std::vector<std::vector<double>> expand(const TokenStep& step) {
  std::vector<double> full;
  for (const auto& entry : step.dist) {
    full.push_back(entry.prob);
  }
  const auto unlisted = step.vocab_size - step.dist.size();
  for (std::size_t j = 0; j < unlisted; ++j) {
    full.push_back(step.tail_mass / static_cast<double>(unlisted));
  }
  return {full};
}

double independent_oriented(const GenerationRecord& record, MetricName metric) {
  std::vector<std::vector<double>> dists;
  std::vector<std::size_t> chosen;
  for (const auto& step : record.steps) {
    dists.push_back(expand(step).front());
    std::size_t index = 0;
    while (step.dist[index].token != step.token) {
      ++index;
    }
    chosen.push_back(index);
  }
  switch (metric) {
    case MetricName::avg_log_p:
      return oracle::avg_log_p(dists, chosen);
    case MetricName::self_certainty:
      return oracle::self_certainty(dists);
    case MetricName::gini:
      return oracle::gini(dists);
    case MetricName::entropy:
      return -oracle::entropy(dists);
    case MetricName::dp:
      return -oracle::dp(dists);
  }
  return 0.0;
}

// --- 7 ----------------------------------------------------------------------

Outcome confident_selection_oracle() {
  Outcome o;
  const auto w = make_world(500);
  const auto backend = std::make_shared<MockBackend>(99);
  std::map<MetricName, std::unique_ptr<Engine>> engines;
  for (const auto metric : kAllMetrics) {
    engines[metric] = std::make_unique<Engine>(w.corpus, w.providers, backend, PromptTemplate::builtin(),
                                               pipeline_with(metric));
  }
  std::mt19937_64 rng(707);
  std::size_t agree = 0;
  std::size_t permutation_checks = 0;
  std::size_t distinct_winners = 0;
  std::set<std::size_t> winners_seen;
  for (std::size_t i = 0; i < w.questions.size(); ++i) {
    const auto metric = kAllMetrics[i % kAllMetrics.size()];
    const auto& engine = *engines.at(metric);
    std::vector<std::size_t> models{0, 1, 2, 3};
    std::shuffle(models.begin(), models.end(), rng);
    models.resize(2 + rng() % 3);

    const auto result = engine.run_confident(w.questions[i], models);
    std::vector<double> scores;
    for (const auto& record : result.records) {
      scores.push_back(independent_oriented(record, metric));
    }
    // Records are ordered by model index, so the lowest index wins ties.
    const auto best = oracle::argmax(scores);
    if (result.final_answer == result.records[best].completion && result.winner == best) {
      ++agree;
    }
    winners_seen.insert(*result.winner_model_index);

    bool unique = true;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (j != best && std::abs(scores[j] - scores[best]) <= 1e-12) {
        unique = false;
      }
    }
    if (unique) {
      auto permuted = models;
      std::shuffle(permuted.begin(), permuted.end(), rng);
      const auto again = engine.run_confident(w.questions[i], permuted);
      o.require(again.final_answer == result.final_answer && again.winner_model_index == result.winner_model_index,
                "permuting the subset changed the answer for " + w.questions[i].id);
      ++permutation_checks;
    }
  }
  distinct_winners = winners_seen.size();
  o.require(agree == w.questions.size(),
            std::to_string(agree) + "/" + std::to_string(w.questions.size()) + " agree with the recomputed argmax");
  if (o.pass) {
    o.detail = "500/500 argmax agreement, " + std::to_string(permutation_checks) + " permutation checks, " +
               std::to_string(distinct_winners) + " distinct winning models";
  }
  return o;
}

// --- 8 ----------------------------------------------------------------------

Outcome degenerate_equalities() {
  Outcome o;
  const auto w = make_world(100);
  const auto backend = std::make_shared<MockBackend>(5);
  const Engine engine(w.corpus, w.providers, backend, PromptTemplate::builtin(), pipeline_with(MetricName::self_certainty));
  const Engine no_refs(w.corpus, w.providers, backend, PromptTemplate::builtin(),
                       pipeline_with(MetricName::self_certainty, RetrievalBudget{.k = 0, .quotas = {}}));
  std::size_t checks = 0;
  for (const auto& q : w.questions) {
    for (std::size_t m = 0; m < w.providers.size(); ++m) {
      const std::vector<std::size_t> only{m};
      const auto vanilla = engine.run_vanilla(q, m);
      for (const auto metric : kAllMetrics) {
        const auto confident = Engine(w.corpus, w.providers, backend, PromptTemplate::builtin(), pipeline_with(metric))
                                   .run_confident(q, only);
        o.require(confident.final_answer == vanilla.final_answer, "N = 1 confident differs from vanilla on " + q.id);
        ++checks;
      }
      o.require(engine.run_mixture(q, only).final_answer == vanilla.final_answer,
                "1-model mixture differs from vanilla on " + q.id);
      const auto k0 = no_refs.run_vanilla(q, m);
      const auto bare = assemble_prompt(PromptTemplate::builtin(), q.text, {});
      o.require(k0.records.front().prompt == bare, "k = 0 prompt is not the bare question on " + q.id);
      o.require(k0.final_answer == no_refs.run_llm(q).final_answer, "k = 0 answer differs from bare LLM on " + q.id);
      checks += 3;
    }
  }
  if (o.pass) {
    o.detail = std::to_string(checks) + " byte-identical comparisons";
  }
  return o;
}

// --- 9 ----------------------------------------------------------------------

Outcome cdf_report_properties() {
  Outcome o;
  std::mt19937_64 rng(909);
  for (int t = 0; t < 200; ++t) {
    std::vector<ScoredOutcome> outcomes(1 + rng() % 300);
    const bool continuous = t % 2 == 0;
    for (auto& s : outcomes) {
      s.oriented = continuous ? std::normal_distribution<double>(0.0, 3.0)(rng) : static_cast<double>(rng() % 15) - 7.0;
      s.correct = rng() % 3 != 0;
    }
    const auto points = cdf_report(outcomes, static_cast<double>(rng() % 4));
    for (std::size_t i = 1; i < points.size(); ++i) {
      o.require(points[i].raw_cdf >= points[i - 1].raw_cdf, "raw CDF decreased");
    }
    o.require(points.back().raw_cdf == 1.0, "raw CDF does not end at 1");
    o.require(std::abs(points.back().smoothed_cdf - 1.0) <= 1e-6, "smoothing moved the terminal value");

    const auto csv = format_cdf_csv(points);
    o.require(csv.substr(0, csv.find('\n')) == "threshold,raw_cdf,smoothed_cdf", "csv header");
    const auto parsed = parse_cdf_csv(csv);
    bool same = parsed.size() == points.size();
    for (std::size_t i = 0; same && i < points.size(); ++i) {
      same = parsed[i].threshold == points[i].threshold && parsed[i].raw_cdf == points[i].raw_cdf &&
             parsed[i].smoothed_cdf == points[i].smoothed_cdf;
    }
    o.require(same, "csv round trip");
    o.require(format_cdf_csv(parsed) == csv, "csv re-format");
  }
  if (o.pass) {
    o.detail = "200 inputs";
  }
  return o;
}

// --- 10 ---------------------------------------------------------------------

Outcome eval_determinism() {
  Outcome o;
  const auto f = testing_support::write_fixture("acceptance_determinism", 10, 3, 31);
  std::vector<std::string> names{"report.json", "tables.txt"};
  for (const auto metric : kAllMetrics) {
    names.push_back("cdf_" + std::string(to_string(metric)) + ".csv");
  }
  std::vector<std::filesystem::path> dirs{f.dir / "run1", f.dir / "run2"};
  for (const auto& dir : dirs) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli({"eval", "--config", f.config.string(), "--out", dir.string()}, out, err);
    o.require(code == 0, "eval failed: " + err.str());
  }
  if (!o.pass) {
    return o;
  }
  for (const auto& name : names) {
    const auto a = testing_support::read_text(dirs[0] / name);
    const auto b = testing_support::read_text(dirs[1] / name);
    o.require(!a.empty(), name + " missing");
    o.require(a == b, name + " differs between runs");
  }
  if (o.pass) {
    o.detail = std::to_string(names.size()) + " files byte-identical (concurrency 3)";
  }
  return o;
}

// --- 11 ---------------------------------------------------------------------

Outcome wire_contract() {
  Outcome o;
  using nlohmann::json;
  ::setenv("CONFRAG_ACCEPTANCE_KEY", "sk-accept", 1);
  auto settings = [](const testing_support::StubServer& s) {
    HttpSettings http;
    http.base_url = s.base_url();
    http.api_key_env = "CONFRAG_ACCEPTANCE_KEY";
    http.max_retries = 0;
    http.timeout = std::chrono::milliseconds(5000);
    return http;
  };
  bool mixed = false;
  bool drop_logprobs = false;
  testing_support::StubServer server(
      [&](const json& req) {
        json data = json::array();
        for (std::size_t i = 0; i < req.at("input").size(); ++i) {
          json vec = mixed && i == 1 ? json{1.0, 2.0, 3.0} : json{1.0, 2.0};
          data.push_back({{"index", i}, {"embedding", vec}});
        }
        return std::pair{200, json{{"data", data}}.dump()};
      },
      [&](const json&) {
        auto body = testing_support::chat_response({{"4", {{"4", -0.05}, {"5", -3.2}}}, {"2", {{"2", -0.01}}}});
        if (drop_logprobs) {
          body["choices"][0].erase("logprobs");
        }
        return std::pair{200, body.dump()};
      });

  RemoteEmbeddingProvider embedder("remote", {.http = settings(server), .model = "embed-model", .batch_size = 64});
  RemoteChatBackend chat({.http = settings(server), .model = "chat-model", .top_logprobs = 7, .vocab_size = 5000});

  const auto vectors = embedder.embed(std::vector<std::string>{"alpha", "beta"});
  o.require(vectors.size() == 2 && vectors[0].dimension() == 2, "embedding response decoding");
  const auto g = generate(chat, "hello", DecodeParams{.temperature = 0.0, .max_tokens = 32, .seed = 0});
  o.require(g.completion == "42" && g.steps.size() == 2, "chat response decoding");

  const auto requests = server.requests();
  o.require(requests.size() == 2, "request count");
  if (requests.size() == 2) {
    const auto& e = requests[0];
    o.require(e.path == "/v1/embeddings", "embeddings path");
    o.require(e.authorization == "Bearer sk-accept", "embeddings auth");
    o.require(e.body == json{{"model", "embed-model"}, {"input", {"alpha", "beta"}}}, "embeddings body shape");
    const auto& c = requests[1];
    o.require(c.path == "/v1/chat/completions", "chat path");
    o.require(c.authorization == "Bearer sk-accept", "chat auth");
    o.require(c.body.at("model") == "chat-model" &&
                  c.body.at("messages") == json::array({{{"role", "user"}, {"content", "hello"}}}) &&
                  c.body.at("temperature") == 0.0 && c.body.at("logprobs") == true && c.body.at("top_logprobs") == 7,
              "chat body shape");
  }

  mixed = true;
  try {
    embedder.embed(std::vector<std::string>{"a", "b"});
    o.require(false, "mixed dimensions accepted");
  } catch (const DimensionMismatchError&) {
  }
  mixed = false;

  drop_logprobs = true;
  try {
    generate(chat, "hello", DecodeParams{});
    o.require(false, "missing logprobs accepted");
  } catch (const LogprobsMissingError&) {
  }
  if (o.pass) {
    o.detail = "request shapes, auth, DimensionMismatchError, LogprobsMissingError";
  }
  return o;
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const std::vector<Criterion> criteria{
      {1, "metric closed-form examples", 1.0, metric_examples},
      {2, "dp / entropy identities", 5.0, dp_entropy_identities},
      {3, "self-certainty nonnegativity", 0.0, self_certainty_nonnegative},
      {4, "fusion oracle", 10.0, fusion_oracle},
      {5, "z-score affine invariance", 0.0, affine_invariance},
      {6, "retrieval top-k oracle", 0.0, retrieval_oracle},
      {7, "confident-selection oracle", 0.0, confident_selection_oracle},
      {8, "degenerate-pipeline equalities", 0.0, degenerate_equalities},
      {9, "CDF report", 0.0, cdf_report_properties},
      {10, "eval determinism", 0.0, eval_determinism},
      {11, "wire-contract conformance", 0.0, wire_contract},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (outcome.pass && c.limit_seconds > 0.0 && seconds >= c.limit_seconds) {
      outcome.pass = false;
      outcome.detail = "over the " + std::to_string(static_cast<int>(c.limit_seconds)) + " s budget";
    }
    failures += outcome.pass ? 0 : 1;
    std::printf("AC%-2d %s  %-32s %8.3f s  %s\n", c.number, outcome.pass ? "PASS" : "FAIL", c.name, seconds,
                outcome.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
