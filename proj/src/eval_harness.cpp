#include "rag/eval_harness.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <future>
#include <set>
#include <tuple>
#include <unordered_set>

#include "rag/chunker.hpp"
#include "rag/errors.hpp"

namespace rag {
namespace {

constexpr std::array<std::string_view, 128> kFiller = {
    "the",     "of",       "and",      "to",       "in",      "trade",    "market",   "price",
    "growth",  "policy",   "country",  "economy",  "export",  "import",   "tariff",   "goods",
    "service", "report",   "data",     "year",     "rate",    "demand",   "supply",   "chain",
    "global",  "regional", "national", "bank",     "finance", "capital",  "invest",   "fund",
    "labour",  "wage",     "energy",   "food",     "crisis",  "risk",     "debt",     "credit",
    "shipping","port",     "freight",  "cost",     "value",   "share",    "output",   "industry",
    "sector",  "firm",     "small",    "large",    "rural",   "urban",    "digital",  "network",
    "survey",  "index",    "measure",  "estimate", "model",   "forecast", "trend",    "change",
    "increase","decrease", "stable",   "volatile", "annual",  "quarter",  "month",    "period",
    "region",  "africa",   "asia",     "europe",   "america", "ocean",    "land",     "water",
    "climate", "carbon",   "green",    "transition","technology","innovation","skill", "education",
    "health",  "poverty",  "income",   "household","consumer","producer", "agreement","partner",
    "member",  "state",    "committee","meeting",  "session", "statement","analysis", "review",
    "outlook", "scenario", "impact",   "effect",   "factor",  "driver",   "barrier",  "access",
    "open",    "closed",   "public",   "private",  "local",   "foreign",  "direct",   "indirect",
    "level",   "volume",    "total",    "average",  "median",  "high",     "low",      "new"};

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t uniform_below(std::uint64_t& state, std::size_t n) {
  return static_cast<std::size_t>(splitmix64(state) % n);
}

std::string doc_id_for(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "doc%05zu", index);
  return buf;
}

std::string sentinel_from(std::uint64_t bits) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "zq%012llx",
                static_cast<unsigned long long>(bits & 0xFFFFFFFFFFFFULL));
  return buf;
}

std::string fmt_metric(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

struct PairResult {
  std::vector<SweepRow> rows;
};

PairResult evaluate_pair(const SweepConfig& config, std::size_t chunk_size, std::size_t overlap) {
  const auto n_top = config.top_ns.size();
  const auto n_cw = config.context_windows.size();

  struct Accum {
    std::size_t queries = 0;
    std::size_t at_1 = 0;
    std::size_t at_n = 0;
    std::size_t in_prompt = 0;
    double rank_sum = 0.0;
    double included_sum = 0.0;
    std::size_t violations = 0;
    double retrieval_ms = 0.0;
  };
  std::vector<Accum> acc(n_top * n_cw);

  ReferenceEmbedder embedder(config.dim);
  const ChunkParams params{chunk_size, overlap};
  const auto max_top = *std::max_element(config.top_ns.begin(), config.top_ns.end());

  for (std::size_t trial = 0; trial < config.trials; ++trial) {
    std::uint64_t seed_state = config.seed;
    for (std::size_t i = 0; i <= trial; ++i) {
      splitmix64(seed_state);
    }
    const auto corpus = build_needle_corpus(config.n_docs, config.doc_tokens, config.n_needles,
                                            seed_state, config.dim);
    const auto store = build_store(corpus.documents, params, embedder);
    if (store.size() == 0) {
      continue;
    }

    for (const auto& needle : corpus.needles) {
      const auto query = embedder.embed_text(needle.sentinel);
      const auto ranking = store.search_flat(query, std::max(max_top, store.size()));
      std::size_t rank = ranking.size() + 1;
      for (std::size_t r = 0; r < ranking.size(); ++r) {
        if (chunk_contains(ranking[r].chunk, needle.sentinel)) {
          rank = r + 1;
          break;
        }
      }

      for (std::size_t t = 0; t < n_top; ++t) {
        const auto top_n = config.top_ns[t];
        const auto started = std::chrono::steady_clock::now();
        const auto hits = store.search_flat(query, top_n);
        const auto elapsed = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - started)
                                 .count();
        for (std::size_t c = 0; c < n_cw; ++c) {
          auto& a = acc[t * n_cw + c];
          ++a.queries;
          a.at_1 += rank == 1 ? 1 : 0;
          a.at_n += rank <= top_n ? 1 : 0;
          a.rank_sum += static_cast<double>(rank);
          a.retrieval_ms += elapsed;

          PromptBudget budget;
          budget.context_window = config.context_windows[c];
          budget.answer_reserve = config.answer_reserve;
          budget.template_cost = config.template_cost;
          const auto bundle = assemble_prompt(hits, needle.sentinel, budget);
          if (bundle.total_tokens + budget.answer_reserve > budget.context_window) {
            ++a.violations;
          }
          a.included_sum += static_cast<double>(bundle.included_hits.size());
          const bool kept = std::any_of(
              bundle.included_hits.begin(), bundle.included_hits.end(),
              [&](const RetrievalHit& h) { return chunk_contains(h.chunk, needle.sentinel); });
          a.in_prompt += kept ? 1 : 0;
        }
      }
    }
  }

  PairResult out;
  for (std::size_t t = 0; t < n_top; ++t) {
    for (std::size_t c = 0; c < n_cw; ++c) {
      const auto& a = acc[t * n_cw + c];
      const double q = a.queries == 0 ? 1.0 : static_cast<double>(a.queries);
      SweepRow row;
      row.chunk_size = chunk_size;
      row.overlap = overlap;
      row.top_n = config.top_ns[t];
      row.context_window = config.context_windows[c];
      row.recall_at_1 = static_cast<double>(a.at_1) / q;
      row.recall_at_n = static_cast<double>(a.at_n) / q;
      row.recall_in_prompt = static_cast<double>(a.in_prompt) / q;
      row.mean_hit_rank = a.rank_sum / q;
      row.mean_included_hits = a.included_sum / q;
      row.prompts_checked = a.queries;
      row.budget_violations = a.violations;
      row.mean_retrieval_ms = a.retrieval_ms / q;
      out.rows.push_back(row);
    }
  }
  return out;
}

}  // namespace

std::span<const std::string_view> filler_vocabulary() { return kFiller; }

NeedleCorpus build_needle_corpus(std::size_t n_docs, std::size_t doc_tokens, std::size_t n_needles,
                                 std::uint64_t seed, std::size_t bucket_dim) {
  if (n_needles > n_docs) {
    throw Error(ErrorCode::InvalidCounts, "n_needles " + std::to_string(n_needles) +
                                              " exceeds n_docs " + std::to_string(n_docs));
  }
  if (n_needles > 0 && doc_tokens == 0) {
    throw Error(ErrorCode::InvalidCounts, "needles need documents with at least one token");
  }

  std::uint64_t rng = seed;
  NeedleCorpus corpus;
  std::vector<std::vector<std::string_view>> words(n_docs);
  for (std::size_t d = 0; d < n_docs; ++d) {
    words[d].reserve(doc_tokens);
    for (std::size_t t = 0; t < doc_tokens; ++t) {
      words[d].push_back(kFiller[uniform_below(rng, kFiller.size())]);
    }
  }

  std::vector<std::size_t> order(n_docs);
  for (std::size_t i = 0; i < n_docs; ++i) {
    order[i] = i;
  }
  for (std::size_t i = 0; i < n_needles; ++i) {
    std::swap(order[i], order[i + uniform_below(rng, n_docs - i)]);
  }

  std::unordered_set<std::size_t> used_buckets;
  if (bucket_dim > 0) {
    for (const auto w : kFiller) {
      used_buckets.insert(fnv1a64(w) % bucket_dim);
    }
    if (bucket_dim < used_buckets.size() + n_needles) {
      throw Error(ErrorCode::InvalidCounts,
                  "dim " + std::to_string(bucket_dim) + " has too few free buckets for " +
                      std::to_string(n_needles) + " sentinels");
    }
  }
  std::set<std::string> sentinels;
  std::vector<std::string> planted(n_docs);
  std::vector<std::size_t> position_of(n_docs, doc_tokens);
  for (std::size_t i = 0; i < n_needles; ++i) {
    std::string sentinel;
    do {
      sentinel = sentinel_from(splitmix64(rng));
    } while (sentinels.contains(sentinel) ||
             (bucket_dim > 0 && used_buckets.contains(fnv1a64(sentinel) % bucket_dim)));
    sentinels.insert(sentinel);
    if (bucket_dim > 0) {
      used_buckets.insert(fnv1a64(sentinel) % bucket_dim);
    }
    const auto doc = order[i];
    const auto position = uniform_below(rng, doc_tokens);
    planted[doc] = sentinel;
    position_of[doc] = position;
    corpus.needles.push_back(Needle{"n" + std::to_string(i), sentinel, doc_id_for(doc), position});
  }

  for (std::size_t d = 0; d < n_docs; ++d) {
    std::string text;
    for (std::size_t t = 0; t < doc_tokens; ++t) {
      if (t > 0) {
        text.push_back(' ');
      }
      text += t == position_of[d] ? std::string_view(planted[d]) : words[d][t];
    }
    Document doc;
    doc.id = doc_id_for(d);
    doc.text = std::move(text);
    doc.metadata["year"] = static_cast<std::int64_t>(2015 + d % 10);
    doc.source_path = "synthetic://" + doc.id;
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

bool chunk_contains(const Chunk& chunk, std::string_view token) {
  const auto tokens = tokenize(chunk.text);
  return std::find(tokens.begin(), tokens.end(), token) != tokens.end();
}

std::optional<std::size_t> sentinel_rank(const VectorStore& store, const Needle& needle,
                                         Embedder& embedder) {
  if (store.size() == 0) {
    return std::nullopt;
  }
  const auto ranking = store.search_flat(embedder.embed_text(needle.sentinel), store.size());
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    if (chunk_contains(ranking[r].chunk, needle.sentinel)) {
      return r + 1;
    }
  }
  return std::nullopt;
}

double recall_at_k(const VectorStore& store, std::span<const Needle> needles, std::size_t k,
                   Embedder& embedder) {
  if (needles.empty()) {
    throw Error(ErrorCode::EmptyNeedles, "recall needs at least one needle");
  }
  if (store.size() == 0) {
    return 0.0;
  }
  std::size_t found = 0;
  for (const auto& needle : needles) {
    const auto hits = store.search_flat(embedder.embed_text(needle.sentinel), k);
    found += std::any_of(hits.begin(), hits.end(),
                         [&](const RetrievalHit& h) { return chunk_contains(h.chunk, needle.sentinel); })
                 ? 1
                 : 0;
  }
  return static_cast<double>(found) / static_cast<double>(needles.size());
}

VectorStore build_store(const std::vector<Document>& documents, const ChunkParams& params,
                        Embedder& embedder) {
  std::vector<Chunk> chunks;
  for (const auto& doc : documents) {
    auto part = chunk_document(doc, params);
    std::move(part.begin(), part.end(), std::back_inserter(chunks));
  }
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) {
    texts.push_back(c.text);
  }
  VectorStore store(StoreMeta{embedder.spec().dim, embedder.spec(), params, 0, 42});
  store.insert(chunks, embedder.embed_batch(texts));
  return store;
}

void validate(const SweepConfig& config) {
  if (config.chunk_sizes.empty() || config.overlaps.empty() || config.top_ns.empty() ||
      config.context_windows.empty()) {
    throw Error(ErrorCode::InvalidConfig, "every sweep axis needs at least one value");
  }
  if (config.trials == 0) {
    throw Error(ErrorCode::InvalidConfig, "trials must be >= 1");
  }
  for (const auto cs : config.chunk_sizes) {
    for (const auto ov : config.overlaps) {
      if (cs == 0 || ov >= cs) {
        throw Error(ErrorCode::InvalidConfig, "overlap " + std::to_string(ov) +
                                                  " must be < chunk size " + std::to_string(cs));
      }
    }
  }
  for (const auto n : config.top_ns) {
    if (n == 0) {
      throw Error(ErrorCode::InvalidConfig, "top_n must be >= 1");
    }
  }
  for (const auto cw : config.context_windows) {
    // Every query is a single sentinel token.
    if (config.answer_reserve == 0 || config.answer_reserve + config.template_cost + 1 > cw) {
      throw Error(ErrorCode::InvalidConfig,
                  "context window " + std::to_string(cw) + " cannot hold the template, a query and "
                  "the answer reserve");
    }
  }
  const auto unique = [](const std::vector<std::size_t>& v) {
    return std::set<std::size_t>(v.begin(), v.end()).size() == v.size();
  };
  if (!unique(config.chunk_sizes) || !unique(config.overlaps) || !unique(config.top_ns) ||
      !unique(config.context_windows)) {
    throw Error(ErrorCode::InvalidConfig, "sweep axes must not repeat values");
  }
  if (config.n_needles == 0) {
    throw Error(ErrorCode::InvalidConfig, "sweep needs at least one needle");
  }
  if (config.n_needles > config.n_docs) {
    throw Error(ErrorCode::InvalidConfig, "more needles than documents");
  }
}

SweepResult run_sweep(const SweepConfig& config) {
  validate(config);
  std::vector<std::future<PairResult>> futures;
  for (const auto cs : config.chunk_sizes) {
    for (const auto ov : config.overlaps) {
      futures.push_back(std::async(std::launch::async, evaluate_pair, std::cref(config), cs, ov));
    }
  }
  SweepResult result;
  for (auto& f : futures) {
    auto part = f.get();
    std::move(part.rows.begin(), part.rows.end(), std::back_inserter(result.rows));
  }
  std::sort(result.rows.begin(), result.rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.chunk_size, a.overlap, a.top_n, a.context_window) <
           std::tie(b.chunk_size, b.overlap, b.top_n, b.context_window);
  });
  return result;
}

std::string sweep_to_csv(const SweepResult& result) {
  std::string out =
      "chunk_size,overlap,top_n,context_window,recall_at_1,recall_at_n,recall_in_prompt,"
      "mean_hit_rank,mean_included_hits,prompts_checked,budget_violations,mean_retrieval_ms\n";
  for (const auto& r : result.rows) {
    out += std::to_string(r.chunk_size) + "," + std::to_string(r.overlap) + "," +
           std::to_string(r.top_n) + "," + std::to_string(r.context_window) + "," +
           fmt_metric(r.recall_at_1) + "," + fmt_metric(r.recall_at_n) + "," +
           fmt_metric(r.recall_in_prompt) + "," + fmt_metric(r.mean_hit_rank) + "," +
           fmt_metric(r.mean_included_hits) + "," + std::to_string(r.prompts_checked) + "," +
           std::to_string(r.budget_violations) + "," + fmt_metric(r.mean_retrieval_ms) + "\n";
  }
  return out;
}

nlohmann::json sweep_to_json(const SweepResult& result) {
  auto rows = nlohmann::json::array();
  for (const auto& r : result.rows) {
    rows.push_back({{"config",
                     {{"chunk_size", r.chunk_size},
                      {"overlap", r.overlap},
                      {"top_n", r.top_n},
                      {"context_window", r.context_window}}},
                    {"recall_at_1", r.recall_at_1},
                    {"recall_at_n", r.recall_at_n},
                    {"recall_in_prompt", r.recall_in_prompt},
                    {"mean_hit_rank", r.mean_hit_rank},
                    {"mean_included_hits", r.mean_included_hits},
                    {"prompts_checked", r.prompts_checked},
                    {"budget_violations", r.budget_violations},
                    {"mean_retrieval_ms", r.mean_retrieval_ms}});
  }
  return {{"rows", std::move(rows)}};
}

}  // namespace rag
