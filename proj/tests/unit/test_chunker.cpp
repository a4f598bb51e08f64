#include <gtest/gtest.h>

#include <random>

#include "rag/chunker.hpp"
#include "rag/errors.hpp"

using namespace rag;

namespace {

Document doc_with_tokens(std::size_t n, Metadata metadata = {}) {
  Document d;
  d.id = "d";
  for (std::size_t i = 0; i < n; ++i) {
    d.text += (i ? " " : "") + std::string("t") + std::to_string(i);
  }
  d.metadata = std::move(metadata);
  return d;
}

std::vector<std::pair<std::size_t, std::size_t>> spans(const std::vector<Chunk>& chunks) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& c : chunks) {
    out.emplace_back(c.token_start, c.token_end);
  }
  return out;
}

using Spans = std::vector<std::pair<std::size_t, std::size_t>>;

}  // namespace

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("a b  c"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(tokenize("x\ny"), (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(tokenize(" \t lead trail \n"), (std::vector<std::string>{"lead", "trail"}));
  EXPECT_EQ(count_tokens("one two three"), 3u);
}

TEST(Tokenize, JoinThenRetokenizeIsStable) {
  std::mt19937_64 rng(5);
  const std::string alphabet = "ab c\n\t.";
  for (int iter = 0; iter < 2000; ++iter) {
    std::string s;
    for (std::size_t i = 0, n = rng() % 30; i < n; ++i) {
      s.push_back(alphabet[rng() % alphabet.size()]);
    }
    const auto tokens = tokenize(s);
    EXPECT_EQ(tokenize(join_tokens(tokens, 0, tokens.size())), tokens);
  }
}

TEST(ChunkDocument, StrideExamples) {
  EXPECT_EQ(spans(chunk_document(doc_with_tokens(10), {4, 0})), (Spans{{0, 4}, {4, 8}, {8, 10}}));
  EXPECT_EQ(spans(chunk_document(doc_with_tokens(10), {4, 1})), (Spans{{0, 4}, {3, 7}, {6, 10}}));
  EXPECT_EQ(spans(chunk_document(doc_with_tokens(3), {8, 2})), (Spans{{0, 3}}));
  EXPECT_TRUE(chunk_document(doc_with_tokens(0), {4, 1}).empty());
}

TEST(ChunkDocument, StopsAtEnd) {
  // A trailing chunk fully inside its predecessor is never emitted.
  EXPECT_EQ(spans(chunk_document(doc_with_tokens(8), {4, 2})), (Spans{{0, 4}, {2, 6}, {4, 8}}));
  EXPECT_EQ(spans(chunk_document(doc_with_tokens(4), {4, 3})), (Spans{{0, 4}}));
}

TEST(ChunkDocument, TextAndMetadata) {
  const auto chunks = chunk_document(doc_with_tokens(5, {{"year", std::int64_t{2020}}}), {3, 1});
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].text, "t0 t1 t2");
  EXPECT_EQ(chunks[1].text, "t2 t3 t4");
  EXPECT_EQ(chunks[1].index, 1u);
  EXPECT_EQ(chunks[1].doc_id, "d");
  EXPECT_EQ(chunks[1].metadata.at("year"), MetaValue(std::int64_t{2020}));
  EXPECT_EQ(chunks[1].metadata.at("doc_id"), MetaValue(std::string("d")));
  EXPECT_EQ(chunks[1].metadata.at("chunk_index"), MetaValue(std::int64_t{1}));
}

TEST(ChunkDocument, InvalidParams) {
  for (const auto& p : {ChunkParams{4, 4}, ChunkParams{4, 9}, ChunkParams{0, 0}}) {
    try {
      chunk_document(doc_with_tokens(3), p);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidParams);
    }
  }
}

TEST(ChunkDocument, Properties) {
  std::mt19937_64 rng(99);
  for (int iter = 0; iter < 3000; ++iter) {
    const std::size_t n = rng() % 60;
    const std::size_t size = 1 + rng() % 20;
    std::size_t overlap = rng() % size;
    if (iter % 5 == 0) {
      overlap = size - 1;
    }
    const auto doc = doc_with_tokens(n, {{"k", std::string("v")}});
    const auto tokens = tokenize(doc.text);
    const auto chunks = chunk_document(doc, {size, overlap});
    if (n == 0) {
      EXPECT_TRUE(chunks.empty());
      continue;
    }
    ASSERT_FALSE(chunks.empty());
    EXPECT_EQ(chunks.front().token_start, 0u);
    EXPECT_EQ(chunks.back().token_end, n);
    std::vector<std::string> rebuilt;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const auto& c = chunks[i];
      EXPECT_EQ(c.index, i);
      EXPECT_LT(c.token_start, c.token_end);
      EXPECT_LE(c.token_end - c.token_start, size);
      EXPECT_EQ(c.text, join_tokens(tokens, c.token_start, c.token_end));
      EXPECT_EQ(c.metadata.at("k"), MetaValue(std::string("v")));
      if (i + 1 < chunks.size()) {
        EXPECT_EQ(c.token_end - chunks[i + 1].token_start, overlap);
        EXPECT_EQ(c.token_end - c.token_start, size);
      }
      auto part = tokenize(c.text);
      rebuilt.insert(rebuilt.end(), part.begin() + static_cast<std::ptrdiff_t>(i == 0 ? 0 : overlap),
                     part.end());
    }
    EXPECT_EQ(rebuilt, tokens);
  }
}
