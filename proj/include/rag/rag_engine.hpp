#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rag/embed.hpp"
#include "rag/filter.hpp"
#include "rag/vector_store.hpp"

namespace rag {

struct RetrievalParams {
  std::size_t top_n = 4;
  double min_score = 0.0;
  std::optional<FilterPredicate> filter;
  bool use_ann = false;
  std::size_t ef_search = 64;
};

struct PromptBudget {
  std::size_t context_window = 4096;
  std::size_t answer_reserve = 512;
  std::size_t template_cost = 0;
  std::size_t separator_cost = 4;  // charged per included chunk
};

/// Throws Error(InvalidBudget) unless answer_reserve + template_cost < context_window.
void validate(const PromptBudget& budget);

struct PromptBundle {
  std::string system_instruction;
  std::vector<RetrievalHit> included_hits;
  std::string query;
  std::size_t total_tokens = 0;
};

struct Answer {
  std::string text;
  std::vector<RetrievalHit> sources;
  std::string backend_id;
};

std::string_view default_system_instruction();

/// Budget whose template_cost covers default_system_instruction() and the
/// fixed framing words of render_messages().
PromptBudget default_budget(std::size_t context_window = 4096, std::size_t answer_reserve = 512);

/// Throws Error(EmbedderMismatch) if the embedder is not the one the store
/// was built with; otherwise propagates EmptyText/DimensionMismatch/StaleIndex.
std::vector<RetrievalHit> retrieve(const VectorStore& store, std::string_view query_text,
                                   const RetrievalParams& params, Embedder& embedder);

/// Walks hits in rank order and keeps each one that still fits; an oversize
/// hit is skipped, never truncated. Throws Error(QueryTooLarge).
PromptBundle assemble_prompt(std::span<const RetrievalHit> hits, std::string_view query,
                             const PromptBudget& budget,
                             std::string system_instruction = std::string(default_system_instruction()));

struct ChatMessage {
  std::string role;
  std::string content;
};

/// Source sections are framed as
///   <<<SOURCE doc_id#chunk_index>>>
///   chunk text
///   <<<END SOURCE>>>
/// and are the only chunk text the model ever sees.
std::vector<ChatMessage> render_messages(const PromptBundle& bundle);
std::string source_tag(const Chunk& chunk);

using TokenSink = std::function<void(std::string_view)>;

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string id() const = 0;
  /// Streams deltas to `on_token` (may be empty) and returns their
  /// concatenation.
  virtual std::string generate(const PromptBundle& bundle, const TokenSink& on_token) = 0;
};

/// Deterministic stand-in for a model: lists the first 30 tokens of each
/// included passage under its source tag.
class ExtractiveBackend final : public GenerationBackend {
 public:
  static constexpr std::string_view kId = "extractive-v1";
  static constexpr std::size_t kExcerptTokens = 30;

  explicit ExtractiveBackend(std::chrono::milliseconds delay = std::chrono::milliseconds{0})
      : delay_(delay) {}

  std::string id() const override { return std::string(kId); }
  std::string generate(const PromptBundle& bundle, const TokenSink& on_token) override;

  /// The full answer text, without streaming.
  static std::string render(const PromptBundle& bundle);

 private:
  std::chrono::milliseconds delay_;
};

struct RemoteBackendConfig {
  std::string endpoint;  // chat-completions URL
  std::string model = "default";
  std::chrono::milliseconds timeout{120000};
  std::optional<std::string> bearer_token;
};

/// Streams from a chat-completions style endpoint: POSTs
/// `{"model", "messages", "stream": true}` and reads line-delimited events
/// (`data: {...}` SSE lines or bare JSON lines) carrying token deltas.
class RemoteChatBackend final : public GenerationBackend {
 public:
  explicit RemoteChatBackend(RemoteBackendConfig config);

  std::string id() const override { return "remote:" + config_.model; }
  std::string generate(const PromptBundle& bundle, const TokenSink& on_token) override;

 private:
  RemoteBackendConfig config_;
};

/// Extracts the token delta from one streamed event payload; nullopt for
/// events that carry none.
std::optional<std::string> parse_stream_delta(std::string_view json_payload);

Answer generate(const PromptBundle& bundle, GenerationBackend& backend, const TokenSink& on_token = {});

Answer answer_query(const VectorStore& store, std::string_view query_text,
                    const RetrievalParams& params, const PromptBudget& budget, Embedder& embedder,
                    GenerationBackend& backend, const TokenSink& on_token = {});

}  // namespace rag
