#pragma once

#include "confrag/generation.hpp"
#include "confrag/retrieval.hpp"
#include "confrag/token_step.hpp"

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace testing_support {

// A full-vocabulary step; zero-probability tokens are left unlisted.
inline confrag::TokenStep make_step(const std::vector<double>& probs, std::size_t chosen) {
  confrag::TokenStep step;
  step.vocab_size = probs.size();
  step.token = "t" + std::to_string(chosen);
  step.chosen_prob = probs[chosen];
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] > 0.0) {
      step.dist.push_back({"t" + std::to_string(j), probs[j]});
    }
  }
  std::stable_sort(step.dist.begin(), step.dist.end(),
                   [](const auto& a, const auto& b) { return a.prob > b.prob; });
  step.tail_mass = 0.0;
  return step;
}

inline std::size_t argmax_index(const std::vector<double>& probs) {
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

// Random strictly positive distribution over `v` tokens.
inline std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t v, double sharpness = 2.0) {
  std::gamma_distribution<double> gamma(1.0 / sharpness, 1.0);
  std::vector<double> p(v);
  double sum = 0.0;
  for (auto& x : p) {
    x = gamma(rng) + 1e-9;
    sum += x;
  }
  for (auto& x : p) {
    x /= sum;
  }
  return p;
}

// Row over chunks "c0".."c{n-1}" with ordinals equal to position.
inline confrag::SimilarityRow make_row(const std::string& model, const std::vector<double>& scores,
                                       const std::vector<int>& kinds = {}) {
  confrag::SimilarityRow row;
  row.model_id = model;
  row.question_id = "q";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    confrag::ScoredChunk entry;
    entry.chunk_id = "c" + std::to_string(i);
    entry.ordinal = i;
    entry.kind = (!kinds.empty() && kinds[i] == 1) ? confrag::ChunkKind::textbook : confrag::ChunkKind::qa;
    entry.score = scores[i];
    row.entries.push_back(entry);
  }
  return row;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("confrag_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small arithmetic corpus: worked QA items with "#### N" answers plus a few
// textbook passages, and a gold file whose questions echo some QA items.
struct Fixture {
  std::filesystem::path dir;
  std::filesystem::path qa;
  std::filesystem::path textbook;
  std::filesystem::path gold;
  std::filesystem::path config;
};

inline Fixture write_fixture(const std::string& name, std::size_t questions = 10, std::size_t concurrency = 1,
                             std::uint64_t seed = 7) {
  Fixture f;
  f.dir = fresh_dir(name);
  f.qa = f.dir / "qa.jsonl";
  f.textbook = f.dir / "textbook.txt";
  f.gold = f.dir / "gold.jsonl";
  f.config = f.dir / "config.json";

  const char* items[] = {"apples", "pencils", "marbles", "stickers", "cookies", "books", "coins", "shells",
                         "cards", "buttons", "stamps", "beads"};
  std::string qa;
  std::string gold;
  for (std::size_t i = 0; i < 12; ++i) {
    const auto a = 3 + i * 2;
    const auto b = 4 + i;
    const auto total = a * b;
    const std::string item = items[i];
    const std::string question = "Each box holds " + std::to_string(a) + " " + item + ". How many " + item +
                                 " are in " + std::to_string(b) + " boxes?";
    qa += R"({"id": "train-)" + std::to_string(i) + R"(", "text": ")" + question + " " + std::to_string(a) +
          " * " + std::to_string(b) + " = " + std::to_string(total) + ". #### " + std::to_string(total) +
          R"(", "kind": "qa"})" + "\n";
    if (i < questions) {
      gold += R"({"id": "test-)" + std::to_string(i) + R"(", "question": "A shop packs )" + std::to_string(a) +
              " " + item + " per box. How many " + item + " fit in " + std::to_string(b) +
              R"( boxes?", "answer": ")" + std::to_string(i % 3 == 0 ? total + 1 : total) + "\"}\n";
    }
  }
  write_text(f.qa, qa);
  write_text(f.textbook,
             "Multiplication counts equal groups. Three groups of four make twelve.\n\n"
             "Division splits a quantity into equal parts.\n\n"
             "Addition combines quantities; subtraction finds a difference.\n");
  write_text(f.gold, gold);
  write_text(f.config, R"({
  "corpus": [{"path": "qa.jsonl", "kind": "qa"}, {"path": "textbook.txt", "kind": "textbook"}],
  "gold": "gold.jsonl",
  "output_dir": ")" + (f.dir / "out").string() + R"(",
  "embedding_models": [{"id": "hash-a"}, {"id": "hash-b", "dimension": 48}, {"id": "hash-c", "dimension": 32}, {"id": "hash-d", "dimension": 96}],
  "seed": )" + std::to_string(seed) + R"(,
  "concurrency": )" + std::to_string(concurrency) + R"(
})");
  return f;
}

}  // namespace testing_support
