#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <regex>
#include <set>

#include "rag/chunker.hpp"
#include "rag/errors.hpp"
#include "rag/eval_harness.hpp"

using namespace rag;

namespace {

std::optional<ErrorCode> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// Ranks every record by exact cosine, independent of the store's search.
std::optional<std::size_t> brute_force_rank(const VectorStore& store, const Needle& needle, std::size_t dim) {
  const auto q = ReferenceEmbedder(dim).embed_text(needle.sentinel);
  std::vector<std::pair<double, std::uint64_t>> scored;
  for (std::uint64_t id = 0; id < store.size(); ++id) {
    double s = 0.0;
    const auto v = store.vector(id);
    for (std::size_t i = 0; i < dim; ++i) {
      s += static_cast<double>(q.values()[i]) * static_cast<double>(v[i]);
    }
    scored.emplace_back(s, id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (std::size_t r = 0; r < scored.size(); ++r) {
    const auto tokens = tokenize(store.chunk(scored[r].second).text);
    if (std::find(tokens.begin(), tokens.end(), needle.sentinel) != tokens.end()) {
      return r + 1;
    }
  }
  return std::nullopt;
}

SweepConfig small_sweep() {
  SweepConfig c;
  c.chunk_sizes = {32, 64};
  c.overlaps = {0, 8};
  c.top_ns = {1, 3, 6};
  c.context_windows = {300, 1200};
  c.n_docs = 20;
  c.doc_tokens = 120;
  c.n_needles = 10;
  c.dim = 256;
  c.answer_reserve = 64;
  c.trials = 2;
  c.seed = 7;
  return c;
}

}  // namespace

TEST(NeedleCorpus, Deterministic) {
  EXPECT_EQ(build_needle_corpus(10, 50, 5, 3, 128), build_needle_corpus(10, 50, 5, 3, 128));
  EXPECT_NE(build_needle_corpus(10, 50, 5, 3, 128), build_needle_corpus(10, 50, 5, 4, 128));
}

TEST(NeedleCorpus, Shape) {
  const auto corpus = build_needle_corpus(30, 80, 12, 11, 512);
  ASSERT_EQ(corpus.documents.size(), 30u);
  ASSERT_EQ(corpus.needles.size(), 12u);
  const std::regex sentinel_re("zq[0-9a-f]{12}");
  std::set<std::string> hosts, sentinels;
  for (const auto& d : corpus.documents) {
    EXPECT_EQ(tokenize(d.text).size(), 80u);
  }
  for (const auto& n : corpus.needles) {
    EXPECT_TRUE(std::regex_match(n.sentinel, sentinel_re)) << n.sentinel;
    hosts.insert(n.host_doc_id);
    sentinels.insert(n.sentinel);
    std::size_t occurrences = 0;
    for (const auto& d : corpus.documents) {
      const auto tokens = tokenize(d.text);
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] == n.sentinel) {
          ++occurrences;
          EXPECT_EQ(d.id, n.host_doc_id);
          EXPECT_EQ(i, n.token_position);
        }
      }
    }
    EXPECT_EQ(occurrences, 1u);
  }
  EXPECT_EQ(hosts.size(), 12u);
  EXPECT_EQ(sentinels.size(), 12u);
}

TEST(NeedleCorpus, SentinelBucketsAreFree) {
  const std::size_t dim = 256;
  const auto corpus = build_needle_corpus(40, 60, 40, 5, dim);
  std::set<std::uint64_t> filler_buckets;
  for (const auto w : filler_vocabulary()) {
    filler_buckets.insert(fnv1a64(w) % dim);
  }
  std::set<std::uint64_t> sentinel_buckets;
  for (const auto& n : corpus.needles) {
    const auto b = fnv1a64(n.sentinel) % dim;
    EXPECT_EQ(filler_buckets.count(b), 0u);
    EXPECT_TRUE(sentinel_buckets.insert(b).second);
  }
}

TEST(NeedleCorpus, NoNeedles) {
  const auto corpus = build_needle_corpus(5, 20, 0, 1, 64);
  EXPECT_EQ(corpus.documents.size(), 5u);
  EXPECT_TRUE(corpus.needles.empty());
}

TEST(NeedleCorpus, InvalidCounts) {
  EXPECT_EQ(code_of([] { build_needle_corpus(5, 20, 6, 1, 64); }), ErrorCode::InvalidCounts);
  EXPECT_EQ(code_of([] { build_needle_corpus(5, 0, 1, 1, 64); }), ErrorCode::InvalidCounts);
  // Not enough free buckets for the sentinels.
  EXPECT_EQ(code_of([] { build_needle_corpus(200, 10, 200, 1, 64); }), ErrorCode::InvalidCounts);
}

TEST(Recall, RankMatchesBruteForce) {
  const std::size_t dim = 256;
  const auto corpus = build_needle_corpus(25, 100, 15, 21, dim);
  ReferenceEmbedder embedder(dim);
  const auto store = build_store(corpus.documents, {32, 8}, embedder);
  for (const auto& n : corpus.needles) {
    EXPECT_EQ(sentinel_rank(store, n, embedder), brute_force_rank(store, n, dim)) << n.sentinel;
  }
  EXPECT_DOUBLE_EQ(recall_at_k(store, corpus.needles, 1, embedder), 1.0);
  EXPECT_DOUBLE_EQ(recall_at_k(store, corpus.needles, store.size(), embedder), 1.0);
}

TEST(Recall, WrongCorpusScoresZero) {
  const std::size_t dim = 256;
  ReferenceEmbedder embedder(dim);
  const auto with = build_needle_corpus(10, 60, 5, 1, dim);
  const auto without = build_needle_corpus(10, 60, 0, 1, dim);
  const auto store = build_store(without.documents, {32, 0}, embedder);
  EXPECT_DOUBLE_EQ(recall_at_k(store, with.needles, store.size(), embedder), 0.0);
  EXPECT_EQ(sentinel_rank(store, with.needles[0], embedder), std::nullopt);
  EXPECT_EQ(code_of([&] { recall_at_k(store, {}, 1, embedder); }), ErrorCode::EmptyNeedles);
}

TEST(Sweep, GridAndInvariants) {
  const auto config = small_sweep();
  const auto result = run_sweep(config);
  ASSERT_EQ(result.rows.size(), 2u * 2u * 3u * 2u);
  EXPECT_TRUE(std::is_sorted(result.rows.begin(), result.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.chunk_size, a.overlap, a.top_n, a.context_window) <
           std::tie(b.chunk_size, b.overlap, b.top_n, b.context_window);
  }));
  for (const auto& row : result.rows) {
    EXPECT_EQ(row.budget_violations, 0u);
    EXPECT_EQ(row.prompts_checked, config.trials * config.n_needles);
    EXPECT_DOUBLE_EQ(row.recall_at_1, 1.0);
    EXPECT_LE(row.recall_in_prompt, row.recall_at_n);
    EXPECT_LE(row.mean_included_hits, static_cast<double>(row.top_n));
    EXPECT_GE(row.mean_hit_rank, 1.0);
  }
  // recall@n cannot drop as n grows.
  for (std::size_t i = 1; i < result.rows.size(); ++i) {
    const auto& a = result.rows[i - 1];
    const auto& b = result.rows[i];
    if (a.chunk_size == b.chunk_size && a.overlap == b.overlap && a.context_window == b.context_window &&
        a.top_n < b.top_n) {
      EXPECT_LE(a.recall_at_n, b.recall_at_n);
    }
  }
}

TEST(Sweep, TightWindowDropsHitsWithoutViolations) {
  auto config = small_sweep();
  config.chunk_sizes = {64};
  config.overlaps = {0};
  config.top_ns = {6};
  config.context_windows = {config.answer_reserve + config.template_cost + 100};
  const auto rows = run_sweep(config).rows;
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].budget_violations, 0u);
  EXPECT_LT(rows[0].mean_included_hits, 2.0);
}

TEST(Sweep, MetricsReproducible) {
  const auto a = run_sweep(small_sweep()).rows;
  const auto b = run_sweep(small_sweep()).rows;
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].recall_at_1, b[i].recall_at_1);
    EXPECT_EQ(a[i].recall_at_n, b[i].recall_at_n);
    EXPECT_EQ(a[i].recall_in_prompt, b[i].recall_in_prompt);
    EXPECT_EQ(a[i].mean_hit_rank, b[i].mean_hit_rank);
    EXPECT_EQ(a[i].mean_included_hits, b[i].mean_included_hits);
    EXPECT_EQ(a[i].budget_violations, b[i].budget_violations);
  }
}

TEST(Sweep, ValidateRejects) {
  const auto bad = [](auto mutate) {
    auto c = small_sweep();
    mutate(c);
    return code_of([&] { validate(c); });
  };
  EXPECT_EQ(bad([](SweepConfig&) {}), std::nullopt);
  EXPECT_EQ(bad([](SweepConfig& c) { c.top_ns.clear(); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](SweepConfig& c) { c.trials = 0; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](SweepConfig& c) { c.overlaps = {32}; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](SweepConfig& c) { c.top_ns = {0}; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](SweepConfig& c) { c.context_windows = {c.answer_reserve + c.template_cost}; }),
            ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](SweepConfig& c) { c.chunk_sizes = {32, 32}; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](SweepConfig& c) { c.n_needles = c.n_docs + 1; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] {
              auto c = small_sweep();
              c.trials = 0;
              run_sweep(c);
            }),
            ErrorCode::InvalidConfig);
}

TEST(Sweep, Serialization) {
  SweepResult result;
  SweepRow row;
  row.chunk_size = 256;
  row.overlap = 32;
  row.top_n = 4;
  row.context_window = 4096;
  row.recall_at_1 = 1.0;
  row.recall_at_n = 1.0;
  row.recall_in_prompt = 0.5;
  row.mean_hit_rank = 1.25;
  row.mean_included_hits = 4.0;
  row.prompts_checked = 100;
  row.budget_violations = 0;
  row.mean_retrieval_ms = 0.125;
  result.rows.push_back(row);
  EXPECT_EQ(sweep_to_csv(result),
            "chunk_size,overlap,top_n,context_window,recall_at_1,recall_at_n,recall_in_prompt,"
            "mean_hit_rank,mean_included_hits,prompts_checked,budget_violations,mean_retrieval_ms\n"
            "256,32,4,4096,1.000000,1.000000,0.500000,1.250000,4.000000,100,0,0.125000\n");
  const auto j = sweep_to_json(result);
  ASSERT_EQ(j["rows"].size(), 1u);
  EXPECT_EQ(j["rows"][0]["config"]["chunk_size"], 256);
  EXPECT_EQ(j["rows"][0]["config"]["context_window"], 4096);
  EXPECT_EQ(j["rows"][0]["recall_in_prompt"], 0.5);
  EXPECT_EQ(j["rows"][0]["budget_violations"], 0);
}
