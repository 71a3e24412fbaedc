#include "confrag/generation.hpp"

#include "confrag/embedding.hpp"
#include "confrag/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace confrag {

std::string_view to_string(DistributionMode mode) {
  return mode == DistributionMode::full ? "full" : "truncated";
}

GenerationRecord generate(const LlmBackend& backend, const std::string& prompt,
                          const DecodeParams& params) {
  auto generation = backend.generate(prompt, params);
  if (generation.steps.empty() || generation.completion.empty()) {
    throw ContractError("backend returned an empty completion");
  }
  for (const auto& step : generation.steps) {
    validate_step(step);
  }
  GenerationRecord record;
  record.prompt = prompt;
  record.completion = std::move(generation.completion);
  record.steps = std::move(generation.steps);
  return record;
}

void score_confidence(GenerationRecord& record) {
  record.confidence = score_all_metrics(record.steps);
}

// ---------------------------------------------------------------------------
// Mock backend

namespace {

class SeededStream {
 public:
  explicit SeededStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27U)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31U);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next() >> 11U) * 0x1.0p-53; }

  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

 private:
  std::uint64_t state_;
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  SeededStream s(a ^ (b * 0x9e3779b97f4a7c15ULL));
  return s.next();
}

const std::vector<std::string> kFillerWords = {
    " first", " we",   " add",  " then",  " so",   " the",  " total", " is",   " each", " more",
    " less",  " times", " left", " next", " has",  " buys", " gets",  " pays", " makes", " answer"};

std::vector<std::string> build_vocabulary() {
  std::vector<std::string> vocab = kFillerWords;
  for (char d = '0'; d <= '9'; ++d) {
    vocab.emplace_back(1, d);
  }
  for (const char* extra : {".", "-", " ####", " ", "\n"}) {
    vocab.emplace_back(extra);
  }
  return vocab;
}

// Number literal starting at `pos`, commas dropped; empty if none.
std::string read_number(std::string_view text, std::size_t pos) {
  std::string out;
  std::size_t i = pos;
  if (i < text.size() && text[i] == '-') {
    out += '-';
    ++i;
  }
  bool digits = false;
  bool dot = false;
  for (; i < text.size(); ++i) {
    const char ch = text[i];
    if (std::isdigit(static_cast<unsigned char>(ch)) != 0) {
      out += ch;
      digits = true;
    } else if (ch == ',' && digits) {
      continue;
    } else if (ch == '.' && digits && !dot && i + 1 < text.size() &&
               std::isdigit(static_cast<unsigned char>(text[i + 1])) != 0) {
      out += ch;
      dot = true;
    } else {
      break;
    }
  }
  return digits ? out : std::string{};
}

std::string marked_answer(std::string_view prompt) {
  for (auto pos = prompt.find("####"); pos != std::string_view::npos;
       pos = prompt.find("####", pos + 4)) {
    auto start = pos + 4;
    while (start < prompt.size() && prompt[start] == ' ') {
      ++start;
    }
    auto number = read_number(prompt, start);
    if (!number.empty()) {
      return number;
    }
  }
  return {};
}

std::vector<std::string> numbers_in(std::string_view prompt) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < prompt.size();) {
    if (std::isdigit(static_cast<unsigned char>(prompt[i])) != 0) {
      auto number = read_number(prompt, i);
      i += 1;
      while (i < prompt.size() && (std::isdigit(static_cast<unsigned char>(prompt[i])) != 0 ||
                                   prompt[i] == ',' || prompt[i] == '.')) {
        ++i;
      }
      out.push_back(std::move(number));
    } else {
      ++i;
    }
  }
  return out;
}

TokenStep sample_step(SeededStream& rng, const std::vector<std::string>& vocab,
                      std::size_t chosen, double margin) {
  std::vector<double> logits(vocab.size());
  double max_other = -1e300;
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    logits[j] = rng.normal();
    if (j != chosen) {
      max_other = std::max(max_other, logits[j]);
    }
  }
  logits[chosen] = max_other + margin;
  const double peak = logits[chosen];
  double z = 0.0;
  for (auto& l : logits) {
    l = std::exp(l - peak);
    z += l;
  }
  std::vector<std::size_t> order(vocab.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });

  TokenStep step;
  step.token = vocab[chosen];
  step.vocab_size = vocab.size();
  step.tail_mass = 0.0;
  step.dist.reserve(vocab.size());
  for (const auto j : order) {
    step.dist.push_back(TokenProb{vocab[j], logits[j] / z});
  }
  step.chosen_prob = logits[chosen] / z;
  return step;
}

}  // namespace

const std::vector<std::string>& MockBackend::default_vocabulary() {
  static const std::vector<std::string> kVocab = build_vocabulary();
  return kVocab;
}

std::vector<TokenStep> MockBackend::default_script(std::uint64_t seed, std::string_view prompt) {
  const auto& vocab = default_vocabulary();
  const auto index_of = [&](std::string_view token) {
    return static_cast<std::size_t>(std::find(vocab.begin(), vocab.end(), token) - vocab.begin());
  };

  SeededStream rng(seed);
  auto answer = marked_answer(prompt);
  const bool grounded = !answer.empty();
  if (!grounded) {
    const auto numbers = numbers_in(prompt);
    answer = numbers.empty() ? std::to_string(1 + rng.below(999)) : numbers[rng.below(numbers.size())];
  }

  std::vector<std::size_t> tokens;
  const auto words = 2 + rng.below(6);
  for (std::size_t i = 0; i < words; ++i) {
    tokens.push_back(rng.below(kFillerWords.size()));
  }
  tokens.push_back(index_of("."));
  tokens.push_back(index_of(" ####"));
  tokens.push_back(index_of(" "));
  for (const char ch : answer) {
    tokens.push_back(index_of(std::string_view(&ch, 1)));
  }

  const double base = grounded ? 3.0 : 0.3;
  const double spread = grounded ? 3.0 : 1.5;
  std::vector<TokenStep> steps;
  steps.reserve(tokens.size());
  for (const auto token : tokens) {
    steps.push_back(sample_step(rng, vocab, token, base + spread * rng.uniform()));
  }
  return steps;
}

MockBackend::MockBackend(std::uint64_t seed)
    : MockBackend(seed, &MockBackend::default_script, default_vocabulary().size()) {}

MockBackend::MockBackend(std::uint64_t seed, MockScript script, std::size_t vocab_size)
    : seed_(seed), script_(std::move(script)), vocab_size_(vocab_size) {}

std::string MockBackend::identity() const { return "mock(seed=" + std::to_string(seed_) + ")"; }

Generation MockBackend::generate(const std::string& prompt, const DecodeParams& params) const {
  const auto seed = mix(mix(seed_, params.seed), fnv1a64(prompt));
  Generation out;
  out.steps = script_(seed, prompt);
  if (params.max_tokens > 0 && out.steps.size() > static_cast<std::size_t>(params.max_tokens)) {
    out.steps.resize(static_cast<std::size_t>(params.max_tokens));
  }
  for (const auto& step : out.steps) {
    out.completion += step.token;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Remote chat backend

RemoteChatBackend::RemoteChatBackend(RemoteChatSettings settings)
    : settings_(std::move(settings)), client_(settings_.http) {
  if (settings_.model.empty()) {
    throw InputError("remote chat backend needs a model name");
  }
  if (settings_.top_logprobs < 1) {
    throw InputError("top_logprobs must be at least 1");
  }
  if (settings_.vocab_size < static_cast<std::size_t>(settings_.top_logprobs)) {
    throw InputError("vocab_size must be at least top_logprobs");
  }
}

std::string RemoteChatBackend::identity() const {
  return settings_.model + "@" + settings_.http.base_url;
}

Generation RemoteChatBackend::generate(const std::string& prompt, const DecodeParams& params) const {
  nlohmann::json request = {
      {"model", settings_.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", params.temperature},
      {"logprobs", true},
      {"top_logprobs", settings_.top_logprobs},
  };
  if (params.max_tokens > 0) {
    request["max_tokens"] = params.max_tokens;
  }
  return parse_response(client_.post("/v1/chat/completions", request), settings_.vocab_size);
}

Generation RemoteChatBackend::parse_response(const nlohmann::json& body, std::size_t vocab_size) {
  const auto choices = body.find("choices");
  if (choices == body.end() || !choices->is_array() || choices->empty()) {
    throw ContractError("chat response has no choices");
  }
  const auto& choice = choices->front();
  Generation out;
  if (const auto message = choice.find("message");
      message != choice.end() && message->contains("content") && (*message)["content"].is_string()) {
    out.completion = (*message)["content"].get<std::string>();
  }

  const auto logprobs = choice.find("logprobs");
  if (logprobs == choice.end() || !logprobs->is_object() || !logprobs->contains("content") ||
      !(*logprobs)["content"].is_array()) {
    throw LogprobsMissingError("chat response carries no per-token logprobs");
  }

  for (const auto& item : (*logprobs)["content"]) {
    if (!item.contains("token") || !item.contains("logprob") || !item.contains("top_logprobs") ||
        !item["top_logprobs"].is_array()) {
      throw LogprobsMissingError("logprobs entry lacks token, logprob or top_logprobs");
    }
    TokenStep step;
    step.token = item["token"].get<std::string>();
    step.chosen_prob = std::min(1.0, std::exp(item["logprob"].get<double>()));
    step.vocab_size = vocab_size;
    bool chosen_listed = false;
    for (const auto& alt : item["top_logprobs"]) {
      const double p = std::min(1.0, std::exp(alt.at("logprob").get<double>()));
      if (!(p > 0.0)) {
        continue;
      }
      auto token = alt.at("token").get<std::string>();
      chosen_listed = chosen_listed || token == step.token;
      step.dist.push_back(TokenProb{std::move(token), p});
    }
    if (!chosen_listed && step.chosen_prob > 0.0) {
      step.dist.push_back(TokenProb{step.token, step.chosen_prob});
    }
    std::stable_sort(step.dist.begin(), step.dist.end(),
                     [](const TokenProb& a, const TokenProb& b) { return a.prob > b.prob; });
    if (step.dist.size() > vocab_size) {
      throw ContractError("top_logprobs lists more tokens than the configured vocabulary size");
    }
    double mass = 0.0;
    for (const auto& entry : step.dist) {
      mass += entry.prob;
    }
    // Logprobs are rounded on the wire; absorb small overshoot by rescaling.
    if (mass > 1.0 + kStepMassTolerance) {
      if (mass > 1.01) {
        throw ContractError("top_logprobs mass exceeds one");
      }
      for (auto& entry : step.dist) {
        entry.prob /= mass;
      }
      step.chosen_prob = std::min(1.0, step.chosen_prob / mass);
      mass = 1.0;
    }
    step.tail_mass = std::max(0.0, 1.0 - mass);
    out.steps.push_back(std::move(step));
  }
  if (out.steps.empty() || out.completion.empty()) {
    throw ContractError("chat response has an empty completion");
  }
  return out;
}

}  // namespace confrag
