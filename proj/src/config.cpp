#include "confrag/config.hpp"

#include "confrag/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

namespace confrag {
namespace {

using json = nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) {
    throw InputError(where + ": expected an object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) {
      throw InputError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) {
    return;
  }
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(where + "." + key + ": " + e.what());
  }
}

std::vector<std::size_t> to_zero_based(const std::vector<std::size_t>& one_based, const std::string& where) {
  std::vector<std::size_t> out;
  for (const auto m : one_based) {
    if (m == 0) {
      throw InputError(where + ": model numbers are 1-based");
    }
    out.push_back(m - 1);
  }
  return out;
}

std::vector<std::size_t> to_one_based(const std::vector<std::size_t>& zero_based) {
  std::vector<std::size_t> out;
  for (const auto m : zero_based) {
    out.push_back(m + 1);
  }
  return out;
}

std::string hex64(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

HttpSettings http_settings(const std::string& endpoint, const std::string& api_key_env,
                           const BackendConfig& retry) {
  HttpSettings http;
  http.base_url = endpoint;
  http.api_key_env = api_key_env;
  http.timeout = std::chrono::milliseconds(retry.timeout_ms);
  http.max_retries = retry.max_retries;
  http.backoff = std::chrono::milliseconds(retry.backoff_ms);
  return http;
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  const std::string root = "config";
  reject_unknown(doc,
                 {"corpus", "gold", "output_dir", "embedding_models", "combination_sizes",
                  "combinations", "k", "quotas", "pipeline", "metric", "models", "backend",
                  "temperature", "max_tokens", "template", "seed", "concurrency", "cdf_sigma",
                  "max_questions"},
                 root);
  RunConfig config;

  if (doc.contains("corpus")) {
    if (!doc["corpus"].is_array()) {
      throw InputError("config.corpus: expected an array");
    }
    for (const auto& item : doc["corpus"]) {
      const std::string where = root + ".corpus[]";
      reject_unknown(item, {"path", "kind"}, where);
      CorpusSource source;
      read(item, "path", source.path, where);
      std::string kind = "qa";
      read(item, "kind", kind, where);
      source.kind = parse_chunk_kind(kind);
      if (source.path.empty()) {
        throw InputError(where + ": missing path");
      }
      config.corpus.push_back(std::move(source));
    }
  }
  read(doc, "gold", config.gold, root);
  read(doc, "output_dir", config.output_dir, root);

  if (doc.contains("embedding_models")) {
    if (!doc["embedding_models"].is_array()) {
      throw InputError("config.embedding_models: expected an array");
    }
    for (const auto& item : doc["embedding_models"]) {
      const std::string where = root + ".embedding_models[]";
      reject_unknown(item, {"id", "mode", "dimension", "endpoint", "model", "api_key_env", "batch_size"},
                     where);
      EmbeddingModelConfig model;
      read(item, "id", model.id, where);
      read(item, "mode", model.mode, where);
      read(item, "dimension", model.dimension, where);
      read(item, "endpoint", model.endpoint, where);
      read(item, "model", model.model, where);
      read(item, "api_key_env", model.api_key_env, where);
      read(item, "batch_size", model.batch_size, where);
      config.embedding_models.push_back(std::move(model));
    }
  }

  read(doc, "combination_sizes", config.combination_sizes, root);
  if (doc.contains("combinations")) {
    std::vector<std::vector<std::size_t>> combos;
    read(doc, "combinations", combos, root);
    for (const auto& combo : combos) {
      config.combinations.push_back(to_zero_based(combo, root + ".combinations"));
    }
  }
  read(doc, "k", config.k, root);
  if (doc.contains("quotas")) {
    if (!doc["quotas"].is_object()) {
      throw InputError("config.quotas: expected an object");
    }
    config.quotas.clear();
    for (const auto& [kind, count] : doc["quotas"].items()) {
      if (!count.is_number_integer() || count.get<long long>() < 0) {
        throw InputError("config.quotas." + kind + ": expected a non-negative integer");
      }
      config.quotas[parse_chunk_kind(kind)] = count.get<std::size_t>();
    }
  }
  if (doc.contains("pipeline")) {
    std::string text;
    read(doc, "pipeline", text, root);
    config.pipeline = parse_pipeline(text);
  }
  if (doc.contains("metric")) {
    std::string text;
    read(doc, "metric", text, root);
    config.metric = parse_metric(text);
  }
  if (doc.contains("models")) {
    std::vector<std::size_t> models;
    read(doc, "models", models, root);
    config.models = to_zero_based(models, root + ".models");
  }

  if (doc.contains("backend")) {
    const auto& b = doc["backend"];
    const std::string where = root + ".backend";
    reject_unknown(b, {"mode", "endpoint", "model", "api_key_env", "top_logprobs", "vocab_size",
                       "timeout_ms", "max_retries", "backoff_ms"},
                   where);
    read(b, "mode", config.backend.mode, where);
    read(b, "endpoint", config.backend.endpoint, where);
    read(b, "model", config.backend.model, where);
    read(b, "api_key_env", config.backend.api_key_env, where);
    read(b, "top_logprobs", config.backend.top_logprobs, where);
    read(b, "vocab_size", config.backend.vocab_size, where);
    read(b, "timeout_ms", config.backend.timeout_ms, where);
    read(b, "max_retries", config.backend.max_retries, where);
    read(b, "backoff_ms", config.backend.backoff_ms, where);
  }
  read(doc, "temperature", config.temperature, root);
  read(doc, "max_tokens", config.max_tokens, root);
  read(doc, "template", config.template_path, root);
  read(doc, "seed", config.seed, root);
  read(doc, "concurrency", config.concurrency, root);
  read(doc, "cdf_sigma", config.cdf_sigma, root);
  if (doc.contains("max_questions") && !doc["max_questions"].is_null()) {
    std::size_t max_questions = 0;
    read(doc, "max_questions", max_questions, root);
    config.max_questions = max_questions;
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot read config '" + path.string() + "'");
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  auto config = parse_run_config(doc);
  // Relative paths in a config file are relative to the file.
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) {
      p = (base / p).lexically_normal().string();
    }
  };
  for (auto& source : config.corpus) {
    resolve(source.path);
  }
  resolve(config.gold);
  resolve(config.template_path);
  return config;
}

json run_config_to_json(const RunConfig& config) {
  json doc;
  json corpus = json::array();
  for (const auto& source : config.corpus) {
    corpus.push_back({{"path", source.path}, {"kind", std::string(to_string(source.kind))}});
  }
  doc["corpus"] = corpus;
  doc["gold"] = config.gold;
  doc["output_dir"] = config.output_dir;
  json models = json::array();
  for (const auto& m : config.embedding_models) {
    models.push_back({{"id", m.id},
                      {"mode", m.mode},
                      {"dimension", m.dimension},
                      {"endpoint", m.endpoint},
                      {"model", m.model},
                      {"api_key_env", m.api_key_env},
                      {"batch_size", m.batch_size}});
  }
  doc["embedding_models"] = models;
  doc["combination_sizes"] = config.combination_sizes;
  json combos = json::array();
  for (const auto& combo : config.combinations) {
    combos.push_back(to_one_based(combo));
  }
  doc["combinations"] = combos;
  doc["k"] = config.k;
  json quotas = json::object();
  for (const auto& [kind, count] : config.quotas) {
    quotas[std::string(to_string(kind))] = count;
  }
  doc["quotas"] = quotas;
  doc["pipeline"] = std::string(to_string(config.pipeline));
  doc["metric"] = std::string(to_string(config.metric));
  doc["models"] = to_one_based(config.models);
  doc["backend"] = {{"mode", config.backend.mode},
                    {"endpoint", config.backend.endpoint},
                    {"model", config.backend.model},
                    {"api_key_env", config.backend.api_key_env},
                    {"top_logprobs", config.backend.top_logprobs},
                    {"vocab_size", config.backend.vocab_size},
                    {"timeout_ms", config.backend.timeout_ms},
                    {"max_retries", config.backend.max_retries},
                    {"backoff_ms", config.backend.backoff_ms}};
  doc["temperature"] = config.temperature;
  doc["max_tokens"] = config.max_tokens;
  doc["template"] = config.template_path;
  doc["seed"] = config.seed;
  doc["concurrency"] = config.concurrency;
  doc["cdf_sigma"] = config.cdf_sigma;
  doc["max_questions"] = config.max_questions ? json(*config.max_questions) : json(nullptr);
  return doc;
}

void validate(const RunConfig& config) {
  std::set<std::string> ids;
  for (const auto& m : config.embedding_models) {
    if (m.id.empty()) {
      throw InputError("config.embedding_models: every model needs an id");
    }
    if (!ids.insert(m.id).second) {
      throw InputError("config.embedding_models: duplicate id '" + m.id + "'");
    }
    if (m.mode != "deterministic-test" && m.mode != "remote") {
      throw InputError("config.embedding_models: unknown mode '" + m.mode + "'");
    }
    if (m.mode == "remote" && m.endpoint.empty()) {
      throw InputError("config.embedding_models: remote model '" + m.id + "' needs an endpoint");
    }
  }
  const auto n = config.embedding_models.size();
  auto check_subset = [&](const std::vector<std::size_t>& subset, const char* where) {
    std::set<std::size_t> seen;
    for (const auto m : subset) {
      if (m >= n) {
        throw InputError(std::string(where) + ": model " + std::to_string(m + 1) + " is not declared");
      }
      if (!seen.insert(m).second) {
        throw InputError(std::string(where) + ": model " + std::to_string(m + 1) + " listed twice");
      }
    }
  };
  for (const auto& combo : config.combinations) {
    if (combo.empty()) {
      throw InputError("config.combinations: empty combination");
    }
    check_subset(combo, "config.combinations");
  }
  check_subset(config.models, "config.models");
  if (config.backend.mode != "mock" && config.backend.mode != "remote") {
    throw InputError("config.backend.mode: expected mock or remote");
  }
  if (config.backend.mode == "remote" && (config.backend.endpoint.empty() || config.backend.model.empty())) {
    throw InputError("config.backend: remote mode needs endpoint and model");
  }
  if (config.concurrency == 0) {
    throw InputError("config.concurrency must be at least 1");
  }
  if (config.cdf_sigma < 0.0) {
    throw InputError("config.cdf_sigma must be non-negative");
  }
  if (config.temperature < 0.0) {
    throw InputError("config.temperature must be non-negative");
  }
}

std::string config_hash(const RunConfig& config) {
  auto doc = run_config_to_json(config);
  doc.erase("output_dir");
  return hex64(fnv1a64(doc.dump()));
}

PipelineConfig pipeline_config(const RunConfig& config) {
  PipelineConfig out;
  out.budget = RetrievalBudget{.k = config.k, .quotas = config.quotas};
  out.metric = config.metric;
  out.decode = DecodeParams{.temperature = config.temperature, .max_tokens = config.max_tokens, .seed = 0};
  out.master_seed = config.seed;
  return out;
}

std::vector<std::shared_ptr<const EmbeddingProvider>> make_providers(const RunConfig& config) {
  std::vector<std::shared_ptr<const EmbeddingProvider>> providers;
  for (const auto& m : config.embedding_models) {
    if (m.mode == "remote") {
      RemoteEmbeddingSettings settings;
      settings.http = http_settings(m.endpoint, m.api_key_env, config.backend);
      settings.model = m.model.empty() ? m.id : m.model;
      settings.batch_size = m.batch_size;
      providers.push_back(std::make_shared<RemoteEmbeddingProvider>(m.id, settings));
    } else {
      providers.push_back(std::make_shared<HashEmbeddingProvider>(m.id, m.dimension));
    }
  }
  return providers;
}

std::shared_ptr<const LlmBackend> make_backend(const RunConfig& config) {
  if (config.backend.mode == "remote") {
    RemoteChatSettings settings;
    settings.http = http_settings(config.backend.endpoint, config.backend.api_key_env, config.backend);
    settings.model = config.backend.model;
    settings.top_logprobs = config.backend.top_logprobs;
    settings.vocab_size = config.backend.vocab_size;
    return std::make_shared<RemoteChatBackend>(settings);
  }
  return std::make_shared<MockBackend>(config.seed);
}

PromptTemplate make_template(const RunConfig& config) {
  return config.template_path.empty() ? PromptTemplate::builtin()
                                      : PromptTemplate::from_file(config.template_path);
}

json make_manifest(const RunConfig& config, const LlmBackend& backend,
                   const std::vector<std::shared_ptr<const EmbeddingProvider>>& providers,
                   const PromptTemplate& prompt_template, const std::string& status) {
  json models = json::array();
  for (std::size_t i = 0; i < providers.size(); ++i) {
    models.push_back({{"index", i + 1}, {"id", providers[i]->model_id()}, {"mode", providers[i]->mode()}});
  }
  return json{
      {"status", status},
      {"config_hash", config_hash(config)},
      {"config", run_config_to_json(config)},
      {"seeds", {{"master", config.seed}, {"per_generation", "fnv1a(question id) keyed by master; generation is a function of (seed, prompt)"}}},
      {"backend",
       {{"identity", backend.identity()},
        {"distribution_mode", std::string(to_string(backend.distribution_mode()))},
        {"vocab_size", backend.vocab_size()},
        {"tail_completion", "uniform over unlisted tokens"}}},
      {"embedding_models", models},
      {"pipeline", std::string(to_string(config.pipeline))},
      {"metric", std::string(to_string(config.metric))},
      {"epsilon", kProbabilityFloor},
      {"decode", {{"temperature", config.temperature}, {"max_tokens", config.max_tokens}}},
      {"template_hash", hex64(fnv1a64(prompt_template.text()))},
  };
}

}  // namespace confrag
