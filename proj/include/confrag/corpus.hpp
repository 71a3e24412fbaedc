#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace confrag {

enum class ChunkKind { qa, textbook };

std::string_view to_string(ChunkKind kind);
/// Throws InputError for anything other than "qa" or "textbook".
ChunkKind parse_chunk_kind(std::string_view text);

struct Chunk {
  std::string id;
  std::string text;
  ChunkKind kind = ChunkKind::qa;
  std::string source;
};

/// Ordered, append-only chunk store. Chunks are immutable once added and the
/// ingestion ordinal of a chunk never changes; retrieval uses it to break ties.
class Corpus {
 public:
  /// Adds one chunk. An empty id is replaced by "chunk-<ordinal>".
  /// Throws InputError on duplicate id or whitespace-only text.
  const Chunk& add(Chunk chunk);

  /// Reads a JSONL file (one chunk object per line) and returns the number of
  /// chunks added. `kind` is used for lines that carry no "kind" field.
  /// The whole file is validated before anything is committed.
  std::size_t ingest_jsonl(const std::filesystem::path& path, ChunkKind kind);

  /// Reads plain text where chunks are separated by blank lines.
  std::size_t ingest_text(const std::filesystem::path& path, ChunkKind kind);

  /// Dispatches on extension: ".jsonl" / ".json" use JSONL, anything else plain text.
  std::size_t ingest(const std::filesystem::path& path, ChunkKind kind);

  const Chunk& get(std::string_view id) const;
  std::optional<std::size_t> ordinal_of(std::string_view id) const;

  const std::vector<Chunk>& chunks() const noexcept { return chunks_; }
  std::size_t size() const noexcept { return chunks_.size(); }
  bool empty() const noexcept { return chunks_.empty(); }

  /// Chunk ids of one kind, in ingestion order.
  const std::vector<std::string>& ids_of_kind(ChunkKind kind) const;
  /// Chunk counts per kind (kinds with no chunks are omitted).
  std::map<ChunkKind, std::size_t> kind_counts() const;

 private:
  std::vector<Chunk> chunks_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<ChunkKind, std::vector<std::string>> by_kind_;
};

}  // namespace confrag
