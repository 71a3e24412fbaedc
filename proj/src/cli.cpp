#include "confrag/cli.hpp"

#include "confrag/config.hpp"
#include "confrag/errors.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <exception>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

namespace confrag {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Sweep

namespace {

struct QuestionSweep {
  std::vector<QuestionResult> results;
  std::vector<DroppedEntry> dropped;
};

QuestionResult empty_result(const Question& q, PipelineKind kind, std::vector<std::size_t> models,
                            MetricName metric) {
  QuestionResult r;
  r.question_id = q.id;
  r.kind = kind;
  r.models = std::move(models);
  r.metric = metric;
  return r;
}

// Transient stage failures become an empty (incorrect) result; anything else
// propagates and aborts the sweep.
template <typename Run>
QuestionResult run_or_drop(Run&& run, const Question& q, PipelineKind kind, std::vector<std::size_t> models,
                           MetricName metric, std::vector<DroppedEntry>& dropped) {
  try {
    return run();
  } catch (const StageError& e) {
    if (!e.transient()) {
      throw;
    }
    spdlog::warn("question {}: {} run over [{}] dropped: {}", q.id, to_string(kind),
                 combination_label(models), e.what());
    dropped.push_back(DroppedEntry{.question_id = q.id,
                                   .combination = std::string(to_string(kind)) + ":" + combination_label(models),
                                   .model_index = models.empty() ? 0 : models.front(),
                                   .error = e.what()});
    return empty_result(q, kind, std::move(models), metric);
  }
}

QuestionSweep sweep_question(const Engine& engine, const QAItem& item,
                             const std::vector<std::vector<std::size_t>>& combinations) {
  const Question q{.id = item.id, .text = item.question};
  const auto metric = engine.config().metric;
  QuestionSweep out;

  out.results.push_back(run_or_drop([&] { return engine.run_llm(q); }, q, PipelineKind::llm, {}, metric,
                                    out.dropped));

  std::vector<std::optional<QuestionResult>> vanilla(engine.model_count());
  for (std::size_t m = 0; m < engine.model_count(); ++m) {
    auto r = run_or_drop([&] { return engine.run_vanilla(q, m); }, q, PipelineKind::vanilla, {m}, metric,
                         out.dropped);
    if (!r.records.empty()) {
      vanilla[m] = r;
    }
    out.results.push_back(std::move(r));
  }

  for (const auto& combo : combinations) {
    out.results.push_back(run_or_drop([&] { return engine.run_mixture(q, combo); }, q, PipelineKind::mixture,
                                      combo, metric, out.dropped));
  }

  for (const auto& combo : combinations) {
    std::vector<QuestionResult> runs;
    for (const auto m : combo) {
      if (vanilla.at(m)) {
        runs.push_back(*vanilla[m]);
      }
    }
    for (const auto name : kAllMetrics) {
      if (runs.empty()) {
        out.results.push_back(empty_result(q, PipelineKind::confident, combo, name));
        continue;
      }
      auto r = engine.select_confident(q, runs, name);
      r.models = combo;
      out.results.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace

SweepOutput run_sweep(const Engine& engine, std::span<const QAItem> questions,
                      const std::vector<std::vector<std::size_t>>& combinations, std::size_t concurrency) {
  std::vector<QuestionSweep> slots(questions.size());
  std::vector<std::exception_ptr> errors(questions.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next.fetch_add(1); i < questions.size(); i = next.fetch_add(1)) {
      try {
        slots[i] = sweep_question(engine, questions[i], combinations);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::clamp<std::size_t>(concurrency, 1, std::max<std::size_t>(questions.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back(worker);
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  SweepOutput out;
  for (auto& slot : slots) {
    std::move(slot.results.begin(), slot.results.end(), std::back_inserter(out.results));
    std::move(slot.dropped.begin(), slot.dropped.end(), std::back_inserter(out.dropped));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Command line

namespace {

struct Overrides {
  std::string config_path;
  std::string pipeline;
  std::string metric;
  std::string models;
  std::optional<std::size_t> k;
  std::vector<std::string> quotas;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool verbose = false;
  std::optional<std::size_t> max_questions;
  std::optional<std::size_t> concurrency;
  std::string template_path;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Run configuration (JSON)");
  cmd->add_option("--pipeline", o.pipeline, "llm | vanilla | mixture | confident");
  cmd->add_option("--metric", o.metric, "avg-log-p | self-certainty | gini | entropy | dp");
  cmd->add_option("--models", o.models, "1-based embedding model numbers, e.g. 1,3");
  cmd->add_option("--k", o.k, "Number of references; clears per-kind quotas unless --quota is given");
  cmd->add_option("--quota", o.quotas, "Per-kind quota kind=count (repeatable)");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--template", o.template_path, "Prompt template file");
  cmd->add_flag("--verbose", o.verbose, "Print retrieval and confidence details");
}

std::vector<std::size_t> parse_model_list(const std::string& text) {
  std::vector<std::size_t> models;
  std::stringstream stream(text);
  std::string part;
  while (std::getline(stream, part, ',')) {
    std::size_t value = 0;
    const auto* first = part.data();
    const auto* last = part.data() + part.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || value == 0) {
      throw InputError("--models expects 1-based numbers separated by commas, got '" + text + "'");
    }
    models.push_back(value - 1);
  }
  if (models.empty()) {
    throw InputError("--models is empty");
  }
  return models;
}

std::pair<ChunkKind, std::size_t> parse_quota(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) {
    throw InputError("--quota expects kind=count, got '" + text + "'");
  }
  const auto kind = parse_chunk_kind(text.substr(0, eq));
  const auto count_text = text.substr(eq + 1);
  std::size_t count = 0;
  const auto [ptr, ec] = std::from_chars(count_text.data(), count_text.data() + count_text.size(), count);
  if (ec != std::errc{} || ptr != count_text.data() + count_text.size() || count_text.empty()) {
    throw InputError("--quota count must be a non-negative integer, got '" + text + "'");
  }
  return {kind, count};
}

RunConfig resolve_config(const Overrides& o) {
  RunConfig config = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
  if (config.embedding_models.empty()) {
    for (int i = 1; i <= 4; ++i) {
      EmbeddingModelConfig model;
      model.id = "hash-" + std::to_string(i);
      config.embedding_models.push_back(std::move(model));
    }
  }
  if (!o.pipeline.empty()) {
    config.pipeline = parse_pipeline(o.pipeline);
  }
  if (!o.metric.empty()) {
    config.metric = parse_metric(o.metric);
  }
  if (!o.models.empty()) {
    config.models = parse_model_list(o.models);
  }
  if (o.k) {
    config.k = *o.k;
    config.quotas.clear();
  }
  if (!o.quotas.empty()) {
    config.quotas.clear();
    for (const auto& q : o.quotas) {
      const auto [kind, count] = parse_quota(q);
      config.quotas[kind] = count;
    }
  }
  if (o.seed) {
    config.seed = *o.seed;
  }
  if (!o.out.empty()) {
    config.output_dir = o.out;
  }
  if (o.max_questions) {
    config.max_questions = *o.max_questions;
  }
  if (o.concurrency) {
    config.concurrency = *o.concurrency;
  }
  if (!o.template_path.empty()) {
    config.template_path = o.template_path;
  }
  validate(config);
  return config;
}

Corpus load_corpus(const RunConfig& config) {
  Corpus corpus;
  for (const auto& source : config.corpus) {
    corpus.ingest(source.path, source.kind);
  }
  return corpus;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw InputError("cannot write '" + path.string() + "'");
  }
  out << content;
  if (!out) {
    throw InputError("failed writing '" + path.string() + "'");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot read '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string format_score(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.6f", value);
  return buffer;
}

// --- ingest ---------------------------------------------------------------

int cmd_ingest(const Overrides& o, const std::vector<std::string>& files, const std::string& kind_text,
               std::ostream& out) {
  std::vector<CorpusSource> sources;
  if (!files.empty()) {
    const auto kind = parse_chunk_kind(kind_text);
    for (const auto& f : files) {
      sources.push_back(CorpusSource{.path = f, .kind = kind});
    }
  } else {
    if (o.config_path.empty()) {
      throw InputError("ingest needs files or --config with a corpus section");
    }
    sources = load_run_config(o.config_path).corpus;
  }
  Corpus corpus;
  for (const auto& source : sources) {
    const auto added = corpus.ingest(source.path, source.kind);
    out << source.path << ": " << added << " chunks\n";
  }
  const auto counts = corpus.kind_counts();
  out << "total: " << corpus.size();
  for (const auto& [kind, count] : counts) {
    out << "  " << to_string(kind) << ": " << count;
  }
  out << '\n';
  return 0;
}

// --- ask ------------------------------------------------------------------

void print_result(const QuestionResult& result, const Engine& engine, bool verbose, std::ostream& out) {
  out << "answer: " << extract_answer(result.final_answer).value_or("") << '\n';
  out << "completion: " << result.final_answer << '\n';
  if (!verbose) {
    return;
  }
  out << "pipeline: " << to_string(result.kind) << '\n';
  for (const auto& [model, ids] : result.retrieved) {
    out << "model " << model + 1 << " (" << engine.provider(model).model_id() << ") retrieved:";
    for (const auto& id : ids) {
      out << ' ' << id;
    }
    out << '\n';
  }
  if (!result.fused.empty()) {
    out << "fused:";
    for (const auto& c : result.fused) {
      out << ' ' << c.chunk_id << "(model " << c.model_index + 1 << ", z=" << format_score(c.standardized) << ")";
    }
    out << '\n';
  }
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const auto& record = result.records[i];
    out << "record " << i;
    if (record.embedding_model_index) {
      out << " (model " << *record.embedding_model_index + 1 << ")";
    }
    out << '\n';
    for (const auto& [name, score] : record.confidence) {
      out << "  " << to_string(name) << ": raw=" << format_score(score.raw)
          << " oriented=" << format_score(score.oriented) << '\n';
    }
  }
  if (result.winner_model_index) {
    out << "winner: model " << *result.winner_model_index + 1 << " (record " << result.winner << ", metric "
        << to_string(result.metric) << ")\n";
  }
  for (const auto& d : result.dropped) {
    out << "dropped: model " << d.model_index + 1 << ": " << d.error << '\n';
  }
}

int cmd_ask(const Overrides& o, const std::string& question, std::ostream& out) {
  const auto config = resolve_config(o);
  const auto corpus = load_corpus(config);
  const auto providers = make_providers(config);
  const auto backend = make_backend(config);
  const auto tmpl = make_template(config);
  const Engine engine(corpus, providers, backend, tmpl, pipeline_config(config));

  std::vector<std::size_t> models = config.models;
  if (models.empty()) {
    for (std::size_t i = 0; i < providers.size(); ++i) {
      models.push_back(i);
    }
  }
  const Question q{.id = "ask", .text = question};
  QuestionResult result;
  switch (config.pipeline) {
    case PipelineKind::llm:
      result = engine.run_llm(q);
      break;
    case PipelineKind::vanilla:
      result = engine.run_vanilla(q, models.front());
      break;
    case PipelineKind::mixture:
      result = engine.run_mixture(q, models);
      break;
    case PipelineKind::confident:
      result = engine.run_confident(q, models);
      break;
  }
  print_result(result, engine, o.verbose, out);

  const auto manifest = make_manifest(config, *backend, providers, tmpl, "complete");
  if (o.verbose) {
    out << "manifest: " << manifest.dump() << '\n';
  }
  if (!o.out.empty()) {
    std::filesystem::create_directories(o.out);
    write_file(std::filesystem::path(o.out) / "manifest.json", manifest.dump(2) + "\n");
  }
  return 0;
}

// --- eval -----------------------------------------------------------------

json confidence_accuracy_section(const std::map<MetricName, std::vector<ScoredOutcome>>& outcomes,
                                 const std::map<MetricName, std::vector<CdfPoint>>& cdfs) {
  json section = json::object();
  for (const auto& [name, points] : cdfs) {
    const auto accuracy = cumulative_accuracy(outcomes.at(name), points);
    json rows = json::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
      rows.push_back({{"threshold", points[i].threshold},
                      {"raw_cdf", points[i].raw_cdf},
                      {"smoothed_cdf", points[i].smoothed_cdf},
                      {"accuracy", accuracy[i]}});
    }
    section[std::string(to_string(name))] = rows;
  }
  return section;
}

int cmd_eval(const Overrides& o, std::ostream& out) {
  auto config = resolve_config(o);
  if (!config.models.empty()) {
    config.combinations = {config.models};
  }
  if (config.gold.empty()) {
    throw InputError("eval needs a gold file (config key 'gold')");
  }
  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);

  const auto providers = make_providers(config);
  const auto backend = make_backend(config);
  const auto tmpl = make_template(config);
  const auto manifest_path = dir / "manifest.json";
  write_file(manifest_path, make_manifest(config, *backend, providers, tmpl, "running").dump(2) + "\n");

  try {
    const auto corpus = load_corpus(config);
    auto items = load_gold(config.gold);
    if (config.max_questions && items.size() > *config.max_questions) {
      items.resize(*config.max_questions);
    }
    std::map<std::string, QAItem> gold;
    for (const auto& item : items) {
      gold.emplace(item.id, item);
    }
    auto combinations = config.combinations;
    if (combinations.empty()) {
      combinations = enumerate_combinations(providers.size(), config.combination_sizes);
    }
    auto pcfg = pipeline_config(config);
    pcfg.parallel_fanout = false;
    const Engine engine(corpus, providers, backend, tmpl, pcfg);

    const auto sweep = run_sweep(engine, items, combinations, config.concurrency);

    auto report = aggregate(sweep.results, gold);
    report.llm = backend->identity();
    for (const auto& p : providers) {
      report.embedding_models.push_back(p->model_id());
    }
    report.summarize();
    report.dropped = sweep.dropped;
    report.manifest_file = "manifest.json";
    report.config_hash = config_hash(config);

    std::map<MetricName, std::vector<ScoredOutcome>> outcomes;
    for (const auto& result : sweep.results) {
      if (result.kind != PipelineKind::vanilla || result.records.empty()) {
        continue;
      }
      const auto& record = result.records.front();
      const bool correct = is_correct(extract_answer(record.completion), gold.at(result.question_id).answer);
      for (const auto& [name, score] : record.confidence) {
        outcomes[name].push_back(ScoredOutcome{.oriented = score.oriented, .correct = correct});
      }
    }
    std::map<MetricName, std::vector<CdfPoint>> cdfs;
    for (const auto& [name, list] : outcomes) {
      cdfs[name] = cdf_report(list, config.cdf_sigma);
    }

    auto doc = to_json(report);
    doc["confidence_accuracy"] = confidence_accuracy_section(outcomes, cdfs);
    write_file(dir / "report.json", doc.dump(2) + "\n");
    write_file(dir / "tables.txt", render_tables(report));
    for (const auto& [name, points] : cdfs) {
      write_file(dir / ("cdf_" + std::string(to_string(name)) + ".csv"), format_cdf_csv(points));
    }
    auto manifest = make_manifest(config, *backend, providers, tmpl, "complete");
    manifest["questions"] = items.size();
    manifest["combinations"] = combinations.size();
    manifest["dropped"] = sweep.dropped.size();
    write_file(manifest_path, manifest.dump(2) + "\n");

    out << render_tables(report);
    if (!sweep.dropped.empty()) {
      out << "dropped records: " << sweep.dropped.size() << '\n';
    }
    out << "wrote " << dir.string() << '\n';
  } catch (const std::exception& e) {
    auto manifest = make_manifest(config, *backend, providers, tmpl, "failed");
    manifest["error"] = e.what();
    write_file(manifest_path, manifest.dump(2) + "\n");
    throw;
  }
  return 0;
}

// --- report ---------------------------------------------------------------

int cmd_report(const std::string& in, const std::string& out_path, std::ostream& out) {
  json doc;
  try {
    doc = json::parse(read_file(in));
  } catch (const json::parse_error& e) {
    throw InputError("'" + in + "' is not valid JSON: " + e.what());
  }
  const auto tables = render_tables(report_from_json(doc));
  if (out_path.empty()) {
    out << tables;
  } else {
    write_file(out_path, tables);
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Retrieval-augmented generation with confidence-based answer selection"};
  app.require_subcommand(1);

  Overrides o;

  auto* ingest = app.add_subcommand("ingest", "Load corpus files and print chunk counts");
  std::vector<std::string> ingest_files;
  std::string ingest_kind = "qa";
  ingest->add_option("files", ingest_files, "JSONL or text files");
  ingest->add_option("--kind", ingest_kind, "qa | textbook (default for lines without a kind)");
  ingest->add_option("--config", o.config_path, "Run configuration (JSON)");

  auto* ask = app.add_subcommand("ask", "Answer one question");
  std::string question;
  ask->add_option("question", question, "Question text")->required();
  add_common(ask, o);
  ask->add_option("--out", o.out, "Directory for manifest.json");

  auto* eval = app.add_subcommand("eval", "Run the evaluation sweep and write reports");
  add_common(eval, o);
  eval->add_option("--out", o.out, "Output directory");
  eval->add_option("--max-questions", o.max_questions, "Evaluate only the first N gold items");
  eval->add_option("--concurrency", o.concurrency, "Worker threads");

  auto* report = app.add_subcommand("report", "Re-render tables from report.json");
  std::string report_in;
  std::string report_out;
  report->add_option("--in", report_in, "report.json")->required();
  report->add_option("--out", report_out, "Write tables here instead of stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*ingest) {
      return cmd_ingest(o, ingest_files, ingest_kind, out);
    }
    if (*ask) {
      return cmd_ask(o, question, out);
    }
    if (*eval) {
      return cmd_eval(o, out);
    }
    return cmd_report(report_in, report_out, out);
  } catch (const StageError& e) {
    err << "error in stage " << e.stage() << ": " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace confrag
