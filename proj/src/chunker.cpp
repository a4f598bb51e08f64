#include "rag/chunker.hpp"

#include <algorithm>

#include "rag/errors.hpp"

namespace rag {
namespace {

constexpr bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

template <typename Fn>
void for_each_token(std::string_view text, Fn&& fn) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) {
      ++i;
    }
    const auto start = i;
    while (i < text.size() && !is_space(text[i])) {
      ++i;
    }
    if (i > start) {
      fn(text.substr(start, i - start));
    }
  }
}

}  // namespace

void validate(const ChunkParams& params) {
  if (params.chunk_size < 1) {
    throw Error(ErrorCode::InvalidParams, "chunk_size must be >= 1");
  }
  if (params.overlap >= params.chunk_size) {
    throw Error(ErrorCode::InvalidParams,
                "overlap " + std::to_string(params.overlap) + " must be < chunk_size " +
                    std::to_string(params.chunk_size));
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  for_each_token(text, [&](std::string_view tok) { tokens.emplace_back(tok); });
  return tokens;
}

std::size_t count_tokens(std::string_view text) {
  std::size_t n = 0;
  for_each_token(text, [&](std::string_view) { ++n; });
  return n;
}

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t begin,
                        std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) {
      out.push_back(' ');
    }
    out += tokens[i];
  }
  return out;
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkParams& params) {
  validate(params);
  const auto tokens = tokenize(doc.text);
  const auto n = tokens.size();
  const auto stride = params.chunk_size - params.overlap;

  std::vector<Chunk> chunks;
  for (std::size_t start = 0; start < n; start += stride) {
    const auto end = std::min(start + params.chunk_size, n);
    Chunk chunk;
    chunk.doc_id = doc.id;
    chunk.index = chunks.size();
    chunk.token_start = start;
    chunk.token_end = end;
    chunk.text = join_tokens(tokens, start, end);
    chunk.metadata = doc.metadata;
    chunk.metadata[std::string(kDocIdKey)] = doc.id;
    chunk.metadata[std::string(kChunkIndexKey)] = static_cast<std::int64_t>(chunk.index);
    chunks.push_back(std::move(chunk));
    if (end == n) {
      break;
    }
  }
  return chunks;
}

}  // namespace rag
