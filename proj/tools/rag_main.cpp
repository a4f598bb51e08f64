// Command-line front end: serve, ingest, vectorize, query, eval.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rag/errors.hpp"
#include "rag/eval_harness.hpp"
#include "rag/http_server.hpp"
#include "rag/service.hpp"

namespace {

rag::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) {
    g_server->stop();
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw rag::Error(rag::ErrorCode::FileNotFound, "cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << data)) {
    throw rag::Error(rag::ErrorCode::IoError, "cannot write " + path.string());
  }
}

struct Common {
  std::string data_dir = "rag-data";
  std::string llm_endpoint;
  std::string llm_model = "default";
  std::string embed_endpoint;
  std::string embedder = std::string(rag::kReferenceEmbedderId);
  std::size_t dim = rag::kDefaultEmbeddingDim;
  std::string auth_token;
  std::size_t context_window = 4096;
  std::size_t answer_reserve = 512;
  double timeout_s = 120.0;
};

rag::ServiceConfig make_config(const Common& c) {
  rag::ServiceConfig config;
  config.data_dir = c.data_dir;
  if (!c.llm_endpoint.empty()) {
    config.llm_endpoint = c.llm_endpoint;
  }
  config.llm_model = c.llm_model;
  if (!c.embed_endpoint.empty()) {
    config.embed_endpoint = c.embed_endpoint;
  }
  config.embedder = rag::EmbedderSpec{c.embedder, c.dim};
  config.budget = rag::default_budget(c.context_window, c.answer_reserve);
  rag::validate(config.budget);
  config.generation_timeout =
      std::chrono::milliseconds(static_cast<std::int64_t>(c.timeout_s * 1000.0));
  if (!c.auth_token.empty()) {
    config.auth_token = c.auth_token;
  }
  return config;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--data-dir", c.data_dir, "State directory")->envname("RAG_DATA_DIR");
  cmd->add_option("--llm-endpoint", c.llm_endpoint, "OpenAI-compatible chat completions URL")
      ->envname("RAG_LLM_ENDPOINT");
  cmd->add_option("--llm-model", c.llm_model, "Model name sent to the LLM endpoint")
      ->envname("RAG_LLM_MODEL");
  cmd->add_option("--embed-endpoint", c.embed_endpoint, "OpenAI-compatible embeddings URL")
      ->envname("RAG_EMBED_ENDPOINT");
  cmd->add_option("--embedder", c.embedder, "Embedder id")->envname("RAG_EMBEDDER");
  cmd->add_option("--dim", c.dim, "Embedding dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--context-window", c.context_window, "Model context window in tokens");
  cmd->add_option("--answer-reserve", c.answer_reserve, "Tokens reserved for the answer");
  cmd->add_option("--timeout", c.timeout_s, "Generation timeout in seconds");
}

void print_report(const rag::IngestReport& report) {
  std::cout << "added " << report.added << " document(s); corpus now has "
            << report.document_count << "\n";
  for (const auto& e : report.errors) {
    std::cerr << "  " << e.id << ": " << e.code << ": " << e.message << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented question answering over local document corpora"};
  app.require_subcommand(1);

  Common common;

  auto* serve = app.add_subcommand("serve", "Run the HTTP/SSE service");
  add_common(serve, common);
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port")->check(CLI::Range(0, 65535));
  serve->add_option("--auth-token", common.auth_token, "Require this bearer token")
      ->envname("RAG_AUTH_TOKEN");

  auto* ingest = app.add_subcommand("ingest", "Add documents from a JSONL manifest");
  add_common(ingest, common);
  std::string corpus;
  std::string manifest;
  ingest->add_option("--corpus", corpus, "Corpus name")->required();
  ingest->add_option("--manifest", manifest, "JSONL manifest; paths resolve against its directory")
      ->required()
      ->check(CLI::ExistingFile);

  auto* vectorize = app.add_subcommand("vectorize", "Chunk, embed and index a corpus");
  add_common(vectorize, common);
  rag::ChunkParams chunk_params;
  vectorize->add_option("--corpus", corpus, "Corpus name")->required();
  vectorize->add_option("--chunk-size", chunk_params.chunk_size, "Tokens per chunk");
  vectorize->add_option("--overlap", chunk_params.overlap, "Tokens shared by adjacent chunks");

  auto* query = app.add_subcommand("query", "Answer one question against a corpus");
  add_common(query, common);
  std::string text;
  std::size_t top_n = 0;
  double min_score = 0.0;
  std::string filter;
  bool use_ann = false;
  query->add_option("--corpus", corpus, "Corpus name")->required();
  query->add_option("--text", text, "Question")->required();
  query->add_option("--top-n", top_n, "Passages to retrieve")->check(CLI::PositiveNumber);
  query->add_option("--min-score", min_score, "Minimum cosine score");
  query->add_option("--filter", filter, "Metadata filter as JSON");
  query->add_flag("--ann", use_ann, "Use the HNSW index instead of the exact scan");

  auto* eval = app.add_subcommand("eval", "Needle-in-haystack retrieval sweep");
  rag::SweepConfig sweep;
  std::string out_path = "sweep.csv";
  eval->add_option("--docs", sweep.n_docs, "Synthetic documents per trial");
  eval->add_option("--doc-tokens", sweep.doc_tokens, "Tokens per document");
  eval->add_option("--needles", sweep.n_needles, "Planted sentinels per trial");
  eval->add_option("--chunk-sizes", sweep.chunk_sizes, "Chunk sizes to sweep")->delimiter(',');
  eval->add_option("--overlaps", sweep.overlaps, "Overlaps to sweep")->delimiter(',');
  eval->add_option("--top-ns", sweep.top_ns, "top_n values to sweep")->delimiter(',');
  eval->add_option("--context-windows", sweep.context_windows, "Context windows to sweep")
      ->delimiter(',');
  eval->add_option("--answer-reserve", sweep.answer_reserve, "Tokens reserved for the answer");
  eval->add_option("--trials", sweep.trials, "Corpora per configuration");
  eval->add_option("--dim", sweep.dim, "Embedding dimension");
  eval->add_option("--seed", sweep.seed, "Corpus seed");
  eval->add_option("--out", out_path, "CSV output; a .json mirror is written alongside");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      rag::Service service(make_config(common));
      rag::HttpServer server(service);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << host << ":" << port << "\n";
      if (!server.listen(host, port)) {
        std::cerr << "error: cannot bind " << host << ":" << port << "\n";
        return 1;
      }
      g_server = nullptr;
    } else if (*ingest) {
      rag::Service service(make_config(common));
      const auto known = service.list_corpora();
      if (std::none_of(known.begin(), known.end(),
                       [&](const rag::CorpusInfo& c) { return c.name == corpus; })) {
        service.create_corpus(corpus);
      }
      const std::filesystem::path manifest_path = manifest;
      print_report(service.add_documents(corpus, read_file(manifest_path),
                                         std::filesystem::absolute(manifest_path).parent_path()));
    } else if (*vectorize) {
      rag::Service service(make_config(common));
      const auto meta = service.vectorize(corpus, chunk_params);
      std::cout << "vectorized " << meta.count << " chunk(s) with " << meta.embedder.id << " (dim "
                << meta.dim << ")\n";
    } else if (*query) {
      rag::Service service(make_config(common));
      rag::RetrievalOverrides overrides;
      if (top_n > 0) {
        overrides.top_n = top_n;
      }
      if (query->count("--min-score") > 0) {
        overrides.min_score = min_score;
      }
      if (!filter.empty()) {
        nlohmann::json parsed;
        try {
          parsed = nlohmann::json::parse(filter);
        } catch (const nlohmann::json::exception& e) {
          throw rag::Error(rag::ErrorCode::InvalidFilter, e.what());
        }
        overrides.filter = rag::filter_from_json(parsed);
      }
      if (use_ann) {
        overrides.use_ann = true;
      }
      const auto answer = service.query_once(corpus, text, overrides);
      std::cout << answer.text << "\n\nSources:\n";
      for (const auto& hit : answer.sources) {
        std::printf("  [%s#%zu] score=%.4f\n", hit.chunk.doc_id.c_str(), hit.chunk.index, hit.score);
      }
    } else if (*eval) {
      const auto result = rag::run_sweep(sweep);
      const std::filesystem::path csv = out_path;
      auto json_path = csv;
      json_path.replace_extension(".json");
      write_file(csv, rag::sweep_to_csv(result));
      write_file(json_path, rag::sweep_to_json(result).dump(2) + "\n");
      std::cout << rag::sweep_to_csv(result);
    }
  } catch (const rag::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
