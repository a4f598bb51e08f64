#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "rag/chunker.hpp"
#include "rag/embed.hpp"
#include "rag/filter.hpp"
#include "rag/hnsw.hpp"

namespace rag {

struct StoreMeta {
  std::size_t dim = kDefaultEmbeddingDim;
  EmbedderSpec embedder;
  ChunkParams chunk_params;
  std::size_t count = 0;
  std::uint64_t ann_seed = 42;
  // metric is always cosine

  bool operator==(const StoreMeta&) const = default;
};

struct ChunkRecord {
  std::uint64_t record_id = 0;
  Chunk chunk;
  EmbeddingVector vector;
};

struct RetrievalHit {
  std::uint64_t record_id = 0;
  double score = 0.0;
  Chunk chunk;

  bool operator==(const RetrievalHit&) const = default;
};

/// Descending score, then ascending record_id.
bool hit_order(const RetrievalHit& a, const RetrievalHit& b);

/// File-backed collection of chunk records with exact and HNSW search.
///
/// Not internally synchronized: const member functions may run
/// concurrently with each other, anything non-const needs exclusive access.
class VectorStore {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  /// Throws Error(InvalidParams) unless dim >= 1, dim == embedder.dim and
  /// count == 0.
  explicit VectorStore(StoreMeta meta);

  const StoreMeta& meta() const noexcept { return meta_; }
  std::size_t size() const noexcept { return chunks_.size(); }

  /// Ids are assigned densely in argument order. Marks any built ANN
  /// index stale.
  std::vector<std::uint64_t> insert(std::span<const Chunk> chunks,
                                    std::span<const EmbeddingVector> vectors);

  /// Exact top-k. The filter restricts the candidate set before scoring.
  std::vector<RetrievalHit> search_flat(const EmbeddingVector& query, std::size_t k,
                                        const std::optional<FilterPredicate>& filter = std::nullopt) const;

  /// Throws Error(EmptyStore).
  void build_ann_index(HnswParams params = {});
  bool has_ann_index() const noexcept { return ann_.has_value(); }
  bool ann_stale() const noexcept { return !ann_ || ann_->size() != size(); }
  const std::optional<HnswIndex>& ann_index() const noexcept { return ann_; }

  /// Throws Error(StaleIndex) when no current index exists.
  std::vector<RetrievalHit> search_ann(const EmbeddingVector& query, std::size_t k,
                                       std::size_t ef_search,
                                       const std::optional<FilterPredicate>& filter = std::nullopt) const;

  const Chunk& chunk(std::uint64_t record_id) const;
  std::span<const float> vector(std::uint64_t record_id) const;
  ChunkRecord record(std::uint64_t record_id) const;

  /// Writes meta.json, vectors.bin, chunks.jsonl and (when current) ann.idx.
  void save(const std::filesystem::path& directory) const;
  /// Throws Error(CorruptStore) with a byte offset, or
  /// Error(IncompatibleVersion).
  static VectorStore load(const std::filesystem::path& directory);

 private:
  RetrievalHit make_hit(std::uint64_t record_id, double score) const;
  void check_dim(const EmbeddingVector& query) const;

  StoreMeta meta_;
  std::vector<float> data_;  // row-major, size() x dim
  std::vector<Chunk> chunks_;
  std::optional<HnswIndex> ann_;
};

/// vectors.bin layout: "VRAG", u32 version, u32 dim, u64 count, then
/// count*dim little-endian float32, row-major.
std::string encode_vectors_file(std::size_t dim, std::span<const float> data);

nlohmann::json chunk_to_json(std::uint64_t record_id, const Chunk& chunk);

}  // namespace rag
