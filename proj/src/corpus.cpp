#include "confrag/corpus.hpp"

#include "confrag/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace confrag {
namespace {

using json = nlohmann::json;

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](unsigned char ch) { return std::isspace(ch) != 0; });
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot read corpus file '" + path.string() + "'");
  }
  return in;
}

std::string optional_string(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    return {};
  }
  if (!it->is_string()) {
    throw InputError(where + ": field '" + key + "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(ChunkKind kind) {
  switch (kind) {
    case ChunkKind::qa:
      return "qa";
    case ChunkKind::textbook:
      return "textbook";
  }
  return "qa";
}

ChunkKind parse_chunk_kind(std::string_view text) {
  if (text == "qa") {
    return ChunkKind::qa;
  }
  if (text == "textbook") {
    return ChunkKind::textbook;
  }
  throw InputError("unknown chunk kind '" + std::string(text) + "' (expected qa or textbook)");
}

const Chunk& Corpus::add(Chunk chunk) {
  if (is_blank(chunk.text)) {
    throw InputError("chunk text is empty");
  }
  if (chunk.id.empty()) {
    chunk.id = "chunk-" + std::to_string(chunks_.size());
  }
  if (by_id_.contains(chunk.id)) {
    throw InputError("duplicate chunk id '" + chunk.id + "'");
  }
  by_id_.emplace(chunk.id, chunks_.size());
  by_kind_[chunk.kind].push_back(chunk.id);
  chunks_.push_back(std::move(chunk));
  return chunks_.back();
}

std::size_t Corpus::ingest_jsonl(const std::filesystem::path& path, ChunkKind kind) {
  auto in = open_or_throw(path);
  std::vector<Chunk> pending;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) {
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) {
      throw InputError(where + ": expected a JSON object");
    }
    for (const auto& [key, value] : obj.items()) {
      if (key != "id" && key != "text" && key != "kind" && key != "source") {
        throw InputError(where + ": unknown field '" + key + "'");
      }
    }
    Chunk chunk;
    chunk.id = optional_string(obj, "id", where);
    chunk.text = optional_string(obj, "text", where);
    chunk.source = optional_string(obj, "source", where);
    const auto kind_text = optional_string(obj, "kind", where);
    try {
      chunk.kind = kind_text.empty() ? kind : parse_chunk_kind(kind_text);
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
    if (is_blank(chunk.text)) {
      throw InputError(where + ": missing or empty 'text'");
    }
    if (chunk.id.empty()) {
      chunk.id = "chunk-" + std::to_string(chunks_.size() + pending.size());
    }
    if (by_id_.contains(chunk.id) || !seen.insert(chunk.id).second) {
      throw InputError(where + ": duplicate chunk id '" + chunk.id + "'");
    }
    pending.push_back(std::move(chunk));
  }
  for (auto& chunk : pending) {
    add(std::move(chunk));
  }
  return pending.size();
}

std::size_t Corpus::ingest_text(const std::filesystem::path& path, ChunkKind kind) {
  auto in = open_or_throw(path);
  std::vector<std::string> blocks;
  std::string current;
  std::string line;
  auto flush = [&] {
    if (!is_blank(current)) {
      blocks.push_back(current);
    }
    current.clear();
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (is_blank(line)) {
      flush();
      continue;
    }
    if (!current.empty()) {
      current += '\n';
    }
    current += line;
  }
  flush();

  const auto first = chunks_.size();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto id = "chunk-" + std::to_string(first + i);
    if (by_id_.contains(id)) {
      throw InputError(path.string() + ": duplicate chunk id '" + id + "'");
    }
  }
  for (auto& text : blocks) {
    add(Chunk{.id = {}, .text = std::move(text), .kind = kind, .source = path.filename().string()});
  }
  return blocks.size();
}

std::size_t Corpus::ingest(const std::filesystem::path& path, ChunkKind kind) {
  const auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json") {
    return ingest_jsonl(path, kind);
  }
  return ingest_text(path, kind);
}

const Chunk& Corpus::get(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) {
    throw InputError("unknown chunk id '" + std::string(id) + "'");
  }
  return chunks_[it->second];
}

std::optional<std::size_t> Corpus::ordinal_of(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) {
    return std::nullopt;
  }
  return it->second;
}

const std::vector<std::string>& Corpus::ids_of_kind(ChunkKind kind) const {
  static const std::vector<std::string> kEmpty;
  const auto it = by_kind_.find(kind);
  return it == by_kind_.end() ? kEmpty : it->second;
}

std::map<ChunkKind, std::size_t> Corpus::kind_counts() const {
  std::map<ChunkKind, std::size_t> counts;
  for (const auto& [kind, ids] : by_kind_) {
    counts[kind] = ids.size();
  }
  return counts;
}

}  // namespace confrag
