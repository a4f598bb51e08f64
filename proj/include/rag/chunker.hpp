#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "rag/ingest.hpp"
#include "rag/metadata.hpp"

namespace rag {

struct ChunkParams {
  std::size_t chunk_size = 256;  // tokens
  std::size_t overlap = 32;      // tokens

  bool operator==(const ChunkParams&) const = default;
};

/// Throws Error(InvalidParams) unless 1 <= chunk_size and overlap < chunk_size.
void validate(const ChunkParams& params);

struct Chunk {
  std::string doc_id;
  std::size_t index = 0;
  std::size_t token_start = 0;  // half-open [token_start, token_end)
  std::size_t token_end = 0;
  std::string text;
  Metadata metadata;  // document metadata plus doc_id and chunk_index

  bool operator==(const Chunk&) const = default;
};

/// Reference tokenizer: maximal runs of non-whitespace bytes.
std::vector<std::string> tokenize(std::string_view text);
std::size_t count_tokens(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t begin, std::size_t end);

std::vector<Chunk> chunk_document(const Document& doc, const ChunkParams& params);

}  // namespace rag
