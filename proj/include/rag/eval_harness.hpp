#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rag/embed.hpp"
#include "rag/ingest.hpp"
#include "rag/rag_engine.hpp"
#include "rag/vector_store.hpp"

namespace rag {

struct Needle {
  std::string needle_id;
  std::string sentinel;  // "zq" + 12 hex digits, unique in the corpus
  std::string host_doc_id;
  std::size_t token_position = 0;  // index of the sentinel in the host document

  bool operator==(const Needle&) const = default;
};

struct NeedleCorpus {
  std::vector<Document> documents;
  std::vector<Needle> needles;

  bool operator==(const NeedleCorpus&) const = default;
};

/// Filler documents drawn from a fixed word list, with one sentinel planted
/// in each of `n_needles` distinct documents. When `bucket_dim` is nonzero,
/// sentinels are chosen so that under the reference embedder at that dim
/// none shares a hash bucket with a filler word or another sentinel.
/// Throws Error(InvalidCounts).
NeedleCorpus build_needle_corpus(std::size_t n_docs, std::size_t doc_tokens, std::size_t n_needles,
                                 std::uint64_t seed, std::size_t bucket_dim = kDefaultEmbeddingDim);

std::span<const std::string_view> filler_vocabulary();

bool chunk_contains(const Chunk& chunk, std::string_view token);

/// 1-based rank of the best chunk containing the needle's sentinel when the
/// sentinel is the query; nullopt if no chunk contains it.
std::optional<std::size_t> sentinel_rank(const VectorStore& store, const Needle& needle,
                                         Embedder& embedder);

/// Fraction of needles whose sentinel query finds a chunk containing it in
/// the top k. Throws Error(EmptyNeedles).
double recall_at_k(const VectorStore& store, std::span<const Needle> needles, std::size_t k,
                   Embedder& embedder);

/// Chunks and embeds a corpus into a fresh store (no ANN index).
VectorStore build_store(const std::vector<Document>& documents, const ChunkParams& params,
                        Embedder& embedder);

struct SweepConfig {
  std::vector<std::size_t> chunk_sizes{256};
  std::vector<std::size_t> overlaps{32};
  std::vector<std::size_t> top_ns{4};
  std::vector<std::size_t> context_windows{4096};
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::size_t n_docs = 100;
  std::size_t doc_tokens = 500;
  std::size_t n_needles = 100;
  std::size_t dim = kDefaultEmbeddingDim;
  std::size_t answer_reserve = 512;
  std::size_t template_cost = default_budget().template_cost;
};

/// Throws Error(InvalidConfig).
void validate(const SweepConfig& config);

struct SweepRow {
  std::size_t chunk_size = 0;
  std::size_t overlap = 0;
  std::size_t top_n = 0;
  std::size_t context_window = 0;
  double recall_at_1 = 0.0;
  double recall_at_n = 0.0;
  double recall_in_prompt = 0.0;  // needle chunk survived prompt assembly
  double mean_hit_rank = 0.0;
  double mean_included_hits = 0.0;
  std::size_t prompts_checked = 0;
  std::size_t budget_violations = 0;  // prompts with total_tokens + answer_reserve > context_window
  double mean_retrieval_ms = 0.0;     // wall clock; excluded from determinism
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by (chunk_size, overlap, top_n, context_window)
};

/// Evaluates every configuration of the grid over `trials` needle corpora
/// (seeds derived from config.seed). (chunk_size, overlap) pairs run in
/// parallel.
SweepResult run_sweep(const SweepConfig& config);

std::string sweep_to_csv(const SweepResult& result);
nlohmann::json sweep_to_json(const SweepResult& result);

}  // namespace rag
