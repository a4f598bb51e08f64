#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rag/embed.hpp"
#include "rag/ingest.hpp"
#include "rag/rag_engine.hpp"
#include "rag/vector_store.hpp"

namespace rag {

enum class CorpusState { Empty, Ingested, Vectorized };
enum class JobState { Queued, Running, Done, Failed };

std::string_view to_string(CorpusState state);
std::string_view to_string(JobState state);

struct ServiceConfig {
  std::filesystem::path data_dir = "rag-data";
  std::optional<std::string> llm_endpoint;
  std::string llm_model = "default";
  std::optional<std::string> embed_endpoint;
  EmbedderSpec embedder;
  ChunkParams chunk_params;
  PromptBudget budget = default_budget();
  RetrievalParams retrieval;
  HnswParams ann;
  std::chrono::milliseconds generation_timeout{120000};
  std::optional<std::string> auth_token;
  /// Base directory for relative paths in manifests posted as JSONL bodies.
  std::filesystem::path ingest_root = std::filesystem::current_path();
};

/// Per-query overrides of the retrieval defaults; unset fields inherit.
struct RetrievalOverrides {
  std::optional<std::size_t> top_n;
  std::optional<double> min_score;
  std::optional<FilterPredicate> filter;
  std::optional<bool> use_ann;

  bool empty() const { return !top_n && !min_score && !filter && !use_ann; }
};

RetrievalOverrides overrides_from_json(const nlohmann::json& body);
nlohmann::json overrides_to_json(const RetrievalOverrides& overrides);

struct IngestError {
  std::string id;
  std::string code;
  std::string message;
};

struct IngestReport {
  std::size_t added = 0;
  std::vector<IngestError> errors;
  std::size_t document_count = 0;
};

struct CorpusInfo {
  std::string name;
  CorpusState state = CorpusState::Empty;
  std::size_t document_count = 0;
  std::optional<StoreMeta> store;
};

struct HistoryEntry {
  std::uint64_t job_id = 0;
  std::string query;
  Answer answer;
  std::int64_t timestamp_ms = 0;  // unix epoch
};

struct SessionInfo {
  std::string session_id;
  std::string corpus;
  std::int64_t created_at_ms = 0;
  RetrievalOverrides defaults;
  std::vector<HistoryEntry> history;
};

struct StreamEvent {
  std::string type;  // status | token | sources | done | failed
  nlohmann::json data;
};

struct JobInfo {
  std::uint64_t job_id = 0;
  std::string session_id;
  std::string query;
  JobState state = JobState::Queued;
  std::chrono::steady_clock::time_point submitted_at;
  std::optional<std::chrono::steady_clock::time_point> started_at;
  std::optional<std::chrono::steady_clock::time_point> finished_at;
  std::optional<std::string> error_code;
};

nlohmann::json hit_to_json(const RetrievalHit& hit);
nlohmann::json answer_to_json(const Answer& answer);
nlohmann::json corpus_to_json(const CorpusInfo& info);
nlohmann::json session_to_json(const SessionInfo& session);
nlohmann::json job_to_json(const JobInfo& job);

/// Corpus management, chat sessions and the generation queue.
///
/// Corpora and sessions persist under `data_dir`; vectorized corpora reload
/// their saved store on startup. Queries run on a single worker thread in
/// ascending job_id order, so at most one generation is ever in flight.
/// Everything else may be called from any thread.
class Service {
 public:
  using EmbedderFactory = std::function<std::shared_ptr<Embedder>(const EmbedderSpec&)>;

  /// `backend` defaults to a RemoteChatBackend when config.llm_endpoint is
  /// set and to ExtractiveBackend otherwise; `embedders` defaults to
  /// make_embedder with config.embed_endpoint.
  explicit Service(ServiceConfig config, std::shared_ptr<GenerationBackend> backend = nullptr,
                   EmbedderFactory embedders = {});
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const ServiceConfig& config() const noexcept { return config_; }

  CorpusInfo create_corpus(const std::string& name);
  std::vector<CorpusInfo> list_corpora() const;
  CorpusInfo corpus_info(const std::string& name) const;

  /// Loads every manifest entry; per-document failures are reported, not
  /// thrown. A malformed manifest throws.
  IngestReport add_documents(const std::string& name, std::string_view manifest_jsonl,
                             const std::filesystem::path& base_dir);
  /// Files are written under the corpus upload directory. Without a
  /// manifest every file becomes a document whose id is its file name.
  IngestReport add_uploaded_files(const std::string& name,
                                  const std::vector<std::pair<std::string, std::string>>& files,
                                  const std::optional<std::string>& manifest_jsonl);

  /// Chunks, embeds, builds the HNSW index and saves the store.
  StoreMeta vectorize(const std::string& name, std::optional<ChunkParams> params = std::nullopt,
                      std::optional<EmbedderSpec> embedder = std::nullopt);

  SessionInfo create_session(const std::string& corpus, RetrievalOverrides defaults = {});
  SessionInfo session(const std::string& session_id) const;
  std::vector<HistoryEntry> history(const std::string& session_id) const;
  /// Rebinds the session; clears its retrieval defaults but keeps history.
  SessionInfo switch_corpus(const std::string& session_id, const std::string& corpus);

  std::uint64_t submit_query(const std::string& session_id, const std::string& text,
                             const RetrievalOverrides& overrides = {});
  JobInfo job(std::uint64_t job_id) const;

  /// Blocks until events past `cursor` exist, the job has ended, or
  /// `timeout` elapses. Appends new events to `out`, advances `cursor`, and
  /// returns true once the terminal event has been delivered.
  bool read_events(std::uint64_t job_id, std::size_t& cursor, std::vector<StreamEvent>& out,
                   std::chrono::milliseconds timeout) const;
  std::vector<StreamEvent> events(std::uint64_t job_id) const;

  /// Blocks until the queue is empty and nothing is running.
  void wait_idle() const;

  /// Runs retrieval and generation synchronously, outside the queue and
  /// without a session (the CLI one-shot path).
  Answer query_once(const std::string& corpus, const std::string& text,
                    const RetrievalOverrides& overrides = {});

  /// Texts embedded by this instance since construction.
  std::uint64_t embed_calls() const;

 private:
  struct Corpus;
  struct Job;

  std::shared_ptr<Corpus> find_corpus(const std::string& name) const;
  std::shared_ptr<Embedder> embedder_for(const EmbedderSpec& spec);
  RetrievalParams resolve(const RetrievalOverrides& session_defaults,
                          const RetrievalOverrides& overrides) const;
  IngestReport ingest(Corpus& corpus, const Manifest& manifest, const std::filesystem::path& base_dir);
  void persist_corpus(const Corpus& corpus) const;
  void persist_session(const SessionInfo& session) const;
  void load_state();
  void worker_loop(std::stop_token stop);
  void run_job(Job& job);
  void emit(Job& job, StreamEvent event);
  void publish_positions();

  ServiceConfig config_;
  std::shared_ptr<GenerationBackend> backend_;
  EmbedderFactory embedder_factory_;

  mutable std::mutex embedders_mutex_;
  std::map<std::pair<std::string, std::size_t>, std::shared_ptr<Embedder>> embedders_;

  mutable std::shared_mutex corpora_mutex_;
  std::map<std::string, std::shared_ptr<Corpus>> corpora_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, SessionInfo> sessions_;

  mutable std::mutex jobs_mutex_;
  mutable std::condition_variable_any jobs_cv_;
  std::map<std::uint64_t, std::shared_ptr<Job>> jobs_;
  std::deque<std::shared_ptr<Job>> queue_;
  std::uint64_t next_job_id_ = 1;
  bool running_ = false;

  std::jthread worker_;  // declared last: joins before the members above go away
};

bool is_valid_corpus_name(std::string_view name);

}  // namespace rag
