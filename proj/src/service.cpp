#include "rag/service.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <random>
#include <regex>

#include "rag/errors.hpp"

namespace rag {
namespace fs = std::filesystem;
namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot read " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, std::string_view text) {
  fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
      throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

CorpusState corpus_state_from(const std::string& s) {
  if (s == "empty") return CorpusState::Empty;
  if (s == "ingested") return CorpusState::Ingested;
  if (s == "vectorized") return CorpusState::Vectorized;
  throw Error(ErrorCode::IoError, "unknown corpus state '" + s + "'");
}

RetrievalHit hit_from_json(const nlohmann::json& obj) {
  RetrievalHit hit;
  hit.record_id = obj.at("record_id").get<std::uint64_t>();
  hit.score = obj.at("score").get<double>();
  hit.chunk.doc_id = obj.at("doc_id").get<std::string>();
  hit.chunk.index = obj.at("chunk_index").get<std::size_t>();
  hit.chunk.token_start = obj.at("token_start").get<std::size_t>();
  hit.chunk.token_end = obj.at("token_end").get<std::size_t>();
  hit.chunk.text = obj.at("text").get<std::string>();
  hit.chunk.metadata = metadata_from_json(obj.at("metadata"));
  return hit;
}

Answer answer_from_json(const nlohmann::json& obj) {
  Answer answer;
  answer.text = obj.at("text").get<std::string>();
  answer.backend_id = obj.at("backend_id").get<std::string>();
  for (const auto& h : obj.at("sources")) {
    answer.sources.push_back(hit_from_json(h));
  }
  return answer;
}

SessionInfo session_from_json(const nlohmann::json& obj) {
  SessionInfo s;
  s.session_id = obj.at("session_id").get<std::string>();
  s.corpus = obj.at("corpus").get<std::string>();
  s.created_at_ms = obj.at("created_at").get<std::int64_t>();
  s.defaults = overrides_from_json(obj.value("defaults", nlohmann::json::object()));
  for (const auto& h : obj.at("history")) {
    HistoryEntry entry;
    entry.job_id = h.at("job_id").get<std::uint64_t>();
    entry.query = h.at("query").get<std::string>();
    entry.timestamp_ms = h.at("timestamp").get<std::int64_t>();
    entry.answer = answer_from_json(h.at("answer"));
    s.history.push_back(std::move(entry));
  }
  return s;
}

std::string new_session_id() {
  static std::mutex mutex;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mutex);
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return buf;
}

std::string sanitize_filename(const std::string& name) {
  auto base = fs::path(name).filename().string();
  if (base.empty() || base == "." || base == "..") {
    throw Error(ErrorCode::BadRequest, "invalid upload file name '" + name + "'");
  }
  return base;
}

}  // namespace

struct Service::Corpus {
  std::string name;
  CorpusState state = CorpusState::Empty;
  std::vector<Document> documents;
  std::shared_ptr<VectorStore> store;
  mutable std::shared_mutex mutex;  // readers query, writers ingest/vectorize

  fs::path dir(const fs::path& data_dir) const { return data_dir / "corpora" / name; }
};

struct Service::Job {
  JobInfo info;
  RetrievalOverrides overrides;
  std::vector<StreamEvent> events;
  bool terminal = false;
};

std::string_view to_string(CorpusState state) {
  switch (state) {
    case CorpusState::Empty: return "empty";
    case CorpusState::Ingested: return "ingested";
    case CorpusState::Vectorized: return "vectorized";
  }
  return "?";
}

std::string_view to_string(JobState state) {
  switch (state) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
  }
  return "?";
}

bool is_valid_corpus_name(std::string_view name) {
  static const std::regex kPattern("[a-z0-9_-]{1,64}");
  return std::regex_match(name.begin(), name.end(), kPattern);
}

RetrievalOverrides overrides_from_json(const nlohmann::json& body) {
  RetrievalOverrides out;
  if (!body.is_object()) {
    return out;
  }
  try {
    if (body.contains("top_n") && !body["top_n"].is_null()) {
      const auto n = body["top_n"].get<std::int64_t>();
      if (n < 1) {
        throw Error(ErrorCode::BadRequest, "top_n must be >= 1");
      }
      out.top_n = static_cast<std::size_t>(n);
    }
    if (body.contains("min_score") && !body["min_score"].is_null()) {
      out.min_score = body["min_score"].get<double>();
    }
    if (body.contains("filter") && !body["filter"].is_null()) {
      out.filter = filter_from_json(body["filter"]);
    }
    if (body.contains("use_ann") && !body["use_ann"].is_null()) {
      out.use_ann = body["use_ann"].get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadRequest, e.what());
  }
  return out;
}

nlohmann::json overrides_to_json(const RetrievalOverrides& o) {
  auto out = nlohmann::json::object();
  if (o.top_n) out["top_n"] = *o.top_n;
  if (o.min_score) out["min_score"] = *o.min_score;
  if (o.filter) out["filter"] = filter_to_json(*o.filter);
  if (o.use_ann) out["use_ann"] = *o.use_ann;
  return out;
}

nlohmann::json hit_to_json(const RetrievalHit& hit) {
  auto out = chunk_to_json(hit.record_id, hit.chunk);
  out["score"] = hit.score;
  return out;
}

nlohmann::json answer_to_json(const Answer& answer) {
  auto sources = nlohmann::json::array();
  for (const auto& hit : answer.sources) {
    sources.push_back(hit_to_json(hit));
  }
  return {{"text", answer.text}, {"backend_id", answer.backend_id}, {"sources", std::move(sources)}};
}

nlohmann::json corpus_to_json(const CorpusInfo& info) {
  nlohmann::json out{{"name", info.name},
                     {"state", to_string(info.state)},
                     {"document_count", info.document_count}};
  if (info.store) {
    out["store"] = {{"dim", info.store->dim},
                    {"embedder_id", info.store->embedder.id},
                    {"chunk_size", info.store->chunk_params.chunk_size},
                    {"overlap", info.store->chunk_params.overlap},
                    {"count", info.store->count},
                    {"ann_seed", info.store->ann_seed}};
  }
  return out;
}

nlohmann::json session_to_json(const SessionInfo& session) {
  auto history = nlohmann::json::array();
  for (const auto& h : session.history) {
    history.push_back({{"job_id", h.job_id},
                       {"query", h.query},
                       {"timestamp", h.timestamp_ms},
                       {"answer", answer_to_json(h.answer)}});
  }
  return {{"session_id", session.session_id},
          {"corpus", session.corpus},
          {"created_at", session.created_at_ms},
          {"defaults", overrides_to_json(session.defaults)},
          {"history", std::move(history)}};
}

nlohmann::json job_to_json(const JobInfo& job) {
  nlohmann::json out{{"job_id", job.job_id},
                     {"session_id", job.session_id},
                     {"query", job.query},
                     {"state", to_string(job.state)}};
  if (job.error_code) {
    out["error"] = *job.error_code;
  }
  return out;
}

Service::Service(ServiceConfig config, std::shared_ptr<GenerationBackend> backend,
                 EmbedderFactory embedders)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      embedder_factory_(std::move(embedders)) {
  validate(config_.budget);
  validate(config_.chunk_params);
  if (!backend_) {
    if (config_.llm_endpoint) {
      backend_ = std::make_shared<RemoteChatBackend>(RemoteBackendConfig{
          *config_.llm_endpoint, config_.llm_model, config_.generation_timeout, std::nullopt});
    } else {
      backend_ = std::make_shared<ExtractiveBackend>();
    }
  }
  if (!embedder_factory_) {
    embedder_factory_ = [endpoint = config_.embed_endpoint](const EmbedderSpec& spec) {
      return make_embedder(spec, endpoint);
    };
  }
  fs::create_directories(config_.data_dir / "corpora");
  fs::create_directories(config_.data_dir / "sessions");
  load_state();
  worker_ = std::jthread([this](std::stop_token stop) { worker_loop(stop); });
}

Service::~Service() {
  worker_.request_stop();
  jobs_cv_.notify_all();
}

std::uint64_t Service::embed_calls() const {
  std::lock_guard lock(embedders_mutex_);
  std::uint64_t total = 0;
  for (const auto& [key, embedder] : embedders_) {
    total += embedder->texts_embedded();
  }
  return total;
}

std::shared_ptr<Embedder> Service::embedder_for(const EmbedderSpec& spec) {
  std::lock_guard lock(embedders_mutex_);
  auto& slot = embedders_[{spec.id, spec.dim}];
  if (!slot) {
    slot = embedder_factory_(spec);
  }
  return slot;
}

std::shared_ptr<Service::Corpus> Service::find_corpus(const std::string& name) const {
  std::shared_lock lock(corpora_mutex_);
  const auto it = corpora_.find(name);
  if (it == corpora_.end()) {
    throw Error(ErrorCode::CorpusNotFound, name);
  }
  return it->second;
}

void Service::persist_corpus(const Corpus& corpus) const {
  const auto dir = corpus.dir(config_.data_dir);
  std::string docs;
  for (const auto& d : corpus.documents) {
    docs += nlohmann::json{{"id", d.id},
                           {"source_path", d.source_path},
                           {"metadata", metadata_to_json(d.metadata)},
                           {"text", d.text}}
                .dump();
    docs += '\n';
  }
  write_text(dir / "documents.jsonl", docs);
  write_text(dir / "corpus.json", nlohmann::json{{"name", corpus.name},
                                                 {"state", to_string(corpus.state)},
                                                 {"document_count", corpus.documents.size()}}
                                          .dump(2));
}

void Service::persist_session(const SessionInfo& session) const {
  write_text(config_.data_dir / "sessions" / (session.session_id + ".json"),
             session_to_json(session).dump());
}

void Service::load_state() {
  for (const auto& entry : fs::directory_iterator(config_.data_dir / "corpora")) {
    const auto meta_path = entry.path() / "corpus.json";
    if (!entry.is_directory() || !fs::exists(meta_path)) {
      continue;
    }
    auto corpus = std::make_shared<Corpus>();
    const auto meta = nlohmann::json::parse(read_text(meta_path));
    corpus->name = meta.at("name").get<std::string>();
    corpus->state = corpus_state_from(meta.at("state").get<std::string>());
    const auto docs_path = entry.path() / "documents.jsonl";
    if (fs::exists(docs_path)) {
      const auto text = read_text(docs_path);
      std::size_t pos = 0;
      while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) {
          end = text.size();
        }
        const auto obj = nlohmann::json::parse(std::string_view(text).substr(pos, end - pos));
        corpus->documents.push_back(Document{obj.at("id").get<std::string>(),
                                             obj.at("text").get<std::string>(),
                                             metadata_from_json(obj.at("metadata")),
                                             obj.at("source_path").get<std::string>()});
        pos = end + 1;
      }
    }
    if (corpus->state == CorpusState::Vectorized) {
      corpus->store = std::make_shared<VectorStore>(VectorStore::load(entry.path() / "store"));
    }
    corpora_.emplace(corpus->name, std::move(corpus));
  }
  for (const auto& entry : fs::directory_iterator(config_.data_dir / "sessions")) {
    if (entry.path().extension() != ".json") {
      continue;
    }
    auto s = session_from_json(nlohmann::json::parse(read_text(entry.path())));
    sessions_.emplace(s.session_id, std::move(s));
  }
}

CorpusInfo Service::create_corpus(const std::string& name) {
  if (!is_valid_corpus_name(name)) {
    throw Error(ErrorCode::InvalidName, "'" + name + "' must match [a-z0-9_-]{1,64}");
  }
  std::unique_lock lock(corpora_mutex_);
  if (corpora_.contains(name)) {
    throw Error(ErrorCode::CorpusExists, name);
  }
  auto corpus = std::make_shared<Corpus>();
  corpus->name = name;
  persist_corpus(*corpus);
  corpora_.emplace(name, corpus);
  return CorpusInfo{name, CorpusState::Empty, 0, std::nullopt};
}

std::vector<CorpusInfo> Service::list_corpora() const {
  std::vector<std::shared_ptr<Corpus>> all;
  {
    std::shared_lock lock(corpora_mutex_);
    for (const auto& [name, corpus] : corpora_) {
      all.push_back(corpus);
    }
  }
  std::vector<CorpusInfo> out;
  for (const auto& corpus : all) {
    out.push_back(corpus_info(corpus->name));
  }
  return out;
}

CorpusInfo Service::corpus_info(const std::string& name) const {
  const auto corpus = find_corpus(name);
  std::shared_lock lock(corpus->mutex);
  CorpusInfo info{corpus->name, corpus->state, corpus->documents.size(), std::nullopt};
  if (corpus->store) {
    info.store = corpus->store->meta();
  }
  return info;
}

IngestReport Service::ingest(Corpus& corpus, const Manifest& manifest, const fs::path& base_dir) {
  IngestReport report;
  std::unique_lock lock(corpus.mutex);
  for (const auto& entry : manifest.entries) {
    const bool exists = std::any_of(corpus.documents.begin(), corpus.documents.end(),
                                    [&](const Document& d) { return d.id == entry.id; });
    if (exists) {
      report.errors.push_back({entry.id, std::string(to_string(ErrorCode::DuplicateId)),
                               "document id already in corpus"});
      continue;
    }
    try {
      corpus.documents.push_back(load_document(entry, base_dir));
      ++report.added;
    } catch (const Error& e) {
      report.errors.push_back({entry.id, std::string(to_string(e.code())), e.what()});
    }
  }
  if (report.added > 0) {
    // New documents invalidate any existing store until re-vectorized.
    corpus.state = CorpusState::Ingested;
    corpus.store.reset();
    persist_corpus(corpus);
  }
  report.document_count = corpus.documents.size();
  return report;
}

IngestReport Service::add_documents(const std::string& name, std::string_view manifest_jsonl,
                                    const fs::path& base_dir) {
  const auto corpus = find_corpus(name);
  return ingest(*corpus, parse_manifest(manifest_jsonl), base_dir);
}

IngestReport Service::add_uploaded_files(const std::string& name,
                                         const std::vector<std::pair<std::string, std::string>>& files,
                                         const std::optional<std::string>& manifest_jsonl) {
  const auto corpus = find_corpus(name);
  const auto upload_dir = corpus->dir(config_.data_dir) / "uploads";
  Manifest manifest;
  if (manifest_jsonl) {
    manifest = parse_manifest(*manifest_jsonl);
  }
  fs::create_directories(upload_dir);
  for (const auto& [filename, content] : files) {
    const auto safe = sanitize_filename(filename);
    write_text(upload_dir / safe, content);
    if (!manifest_jsonl) {
      manifest.entries.push_back(ManifestEntry{safe, safe, {}});
    }
  }
  return ingest(*corpus, manifest, upload_dir);
}

StoreMeta Service::vectorize(const std::string& name, std::optional<ChunkParams> params,
                             std::optional<EmbedderSpec> embedder_spec) {
  const auto corpus = find_corpus(name);
  const auto chunk_params = params.value_or(config_.chunk_params);
  validate(chunk_params);
  const auto spec = embedder_spec.value_or(config_.embedder);

  std::unique_lock lock(corpus->mutex);
  if (corpus->state != CorpusState::Ingested) {
    throw Error(ErrorCode::WrongState,
                "corpus '" + name + "' is " + std::string(to_string(corpus->state)) +
                    ", vectorize needs ingested");
  }
  std::vector<Chunk> chunks;
  for (const auto& doc : corpus->documents) {
    auto doc_chunks = chunk_document(doc, chunk_params);
    std::move(doc_chunks.begin(), doc_chunks.end(), std::back_inserter(chunks));
  }
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) {
    texts.push_back(c.text);
  }
  const auto vectors = embedder_for(spec)->embed_batch(texts);

  auto store = std::make_shared<VectorStore>(StoreMeta{spec.dim, spec, chunk_params, 0, 42});
  store->insert(chunks, vectors);
  if (store->size() > 0) {
    store->build_ann_index(config_.ann);
  }
  store->save(corpus->dir(config_.data_dir) / "store");
  corpus->store = store;
  corpus->state = CorpusState::Vectorized;
  persist_corpus(*corpus);
  return store->meta();
}

SessionInfo Service::create_session(const std::string& corpus, RetrievalOverrides defaults) {
  find_corpus(corpus);
  SessionInfo session;
  session.session_id = new_session_id();
  session.corpus = corpus;
  session.created_at_ms = now_ms();
  session.defaults = std::move(defaults);
  std::lock_guard lock(sessions_mutex_);
  persist_session(session);
  sessions_.emplace(session.session_id, session);
  return session;
}

SessionInfo Service::session(const std::string& session_id) const {
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) {
    throw Error(ErrorCode::SessionNotFound, session_id);
  }
  return it->second;
}

std::vector<HistoryEntry> Service::history(const std::string& session_id) const {
  return session(session_id).history;
}

SessionInfo Service::switch_corpus(const std::string& session_id, const std::string& corpus) {
  find_corpus(corpus);
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) {
    throw Error(ErrorCode::SessionNotFound, session_id);
  }
  it->second.corpus = corpus;
  it->second.defaults = {};
  persist_session(it->second);
  return it->second;
}

RetrievalParams Service::resolve(const RetrievalOverrides& session_defaults,
                                 const RetrievalOverrides& overrides) const {
  auto params = config_.retrieval;
  for (const auto* o : {&session_defaults, &overrides}) {
    if (o->top_n) params.top_n = *o->top_n;
    if (o->min_score) params.min_score = *o->min_score;
    if (o->filter) params.filter = *o->filter;
    if (o->use_ann) params.use_ann = *o->use_ann;
  }
  return params;
}

std::uint64_t Service::submit_query(const std::string& session_id, const std::string& text,
                                    const RetrievalOverrides& overrides) {
  const auto s = session(session_id);
  const auto corpus = find_corpus(s.corpus);
  {
    std::shared_lock lock(corpus->mutex);
    if (corpus->state != CorpusState::Vectorized) {
      throw Error(ErrorCode::CorpusNotReady, "corpus '" + s.corpus + "' is " +
                                                 std::string(to_string(corpus->state)));
    }
  }
  auto job = std::make_shared<Job>();
  job->info.session_id = session_id;
  job->info.query = text;
  job->overrides = overrides;

  std::lock_guard lock(jobs_mutex_);
  job->info.job_id = next_job_id_++;
  job->info.submitted_at = std::chrono::steady_clock::now();
  const auto position = queue_.size() + (running_ ? 1 : 0);
  job->events.push_back({"status", {{"state", "queued"}, {"position", position}}});
  jobs_.emplace(job->info.job_id, job);
  queue_.push_back(job);
  jobs_cv_.notify_all();
  return job->info.job_id;
}

JobInfo Service::job(std::uint64_t job_id) const {
  std::lock_guard lock(jobs_mutex_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) {
    throw Error(ErrorCode::JobNotFound, std::to_string(job_id));
  }
  return it->second->info;
}

bool Service::read_events(std::uint64_t job_id, std::size_t& cursor, std::vector<StreamEvent>& out,
                          std::chrono::milliseconds timeout) const {
  std::unique_lock lock(jobs_mutex_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) {
    throw Error(ErrorCode::JobNotFound, std::to_string(job_id));
  }
  const auto job = it->second;
  jobs_cv_.wait_for(lock, timeout, [&] { return job->events.size() > cursor || job->terminal; });
  for (; cursor < job->events.size(); ++cursor) {
    out.push_back(job->events[cursor]);
  }
  return job->terminal;
}

std::vector<StreamEvent> Service::events(std::uint64_t job_id) const {
  std::lock_guard lock(jobs_mutex_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) {
    throw Error(ErrorCode::JobNotFound, std::to_string(job_id));
  }
  return it->second->events;
}

void Service::wait_idle() const {
  std::unique_lock lock(jobs_mutex_);
  jobs_cv_.wait(lock, [&] { return queue_.empty() && !running_; });
}

void Service::emit(Job& job, StreamEvent event) {
  std::lock_guard lock(jobs_mutex_);
  job.events.push_back(std::move(event));
  jobs_cv_.notify_all();
}

// Caller holds jobs_mutex_.
void Service::publish_positions() {
  std::size_t position = running_ ? 1 : 0;
  for (const auto& queued : queue_) {
    queued->events.push_back({"status", {{"state", "queued"}, {"position", position++}}});
  }
}

void Service::worker_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lock(jobs_mutex_);
      if (!jobs_cv_.wait(lock, stop, [&] { return !queue_.empty(); })) {
        return;
      }
      job = queue_.front();
      queue_.pop_front();
      running_ = true;
      job->info.state = JobState::Running;
      job->info.started_at = std::chrono::steady_clock::now();
      job->events.push_back({"status", {{"state", "running"}, {"position", 0}}});
      publish_positions();
      jobs_cv_.notify_all();
    }
    run_job(*job);
    {
      std::lock_guard lock(jobs_mutex_);
      running_ = false;
      jobs_cv_.notify_all();
    }
  }
}

void Service::run_job(Job& job) {
  std::vector<RetrievalHit> sources;
  const auto finish = [&](JobState state, StreamEvent terminal) {
    auto hits = nlohmann::json::array();
    for (const auto& h : sources) {
      hits.push_back(hit_to_json(h));
    }
    std::lock_guard lock(jobs_mutex_);
    job.events.push_back({"sources", {{"hits", std::move(hits)}}});
    job.events.push_back(std::move(terminal));
    job.info.state = state;
    job.info.finished_at = std::chrono::steady_clock::now();
    job.terminal = true;
    jobs_cv_.notify_all();
  };

  try {
    const auto s = session(job.info.session_id);
    const auto corpus = find_corpus(s.corpus);
    PromptBundle bundle;
    {
      std::shared_lock lock(corpus->mutex);
      if (corpus->state != CorpusState::Vectorized || !corpus->store) {
        throw Error(ErrorCode::CorpusNotReady, s.corpus);
      }
      auto params = resolve(s.defaults, job.overrides);
      if (corpus->store->size() == 0) {
        params.use_ann = false;
      }
      const auto hits = retrieve(*corpus->store, job.info.query, params,
                                 *embedder_for(corpus->store->meta().embedder));
      bundle = assemble_prompt(hits, job.info.query, config_.budget);
    }
    sources = bundle.included_hits;

    auto answer = generate(bundle, *backend_, [&](std::string_view delta) {
      emit(job, {"token", {{"text", delta}}});
    });

    {
      std::lock_guard lock(sessions_mutex_);
      if (const auto it = sessions_.find(job.info.session_id); it != sessions_.end()) {
        it->second.history.push_back(HistoryEntry{job.info.job_id, job.info.query, answer, now_ms()});
        persist_session(it->second);
      }
    }
    finish(JobState::Done,
           {"done", {{"job_id", job.info.job_id}, {"backend_id", answer.backend_id}}});
  } catch (const Error& e) {
    {
      std::lock_guard lock(jobs_mutex_);
      job.info.error_code = std::string(to_string(e.code()));
    }
    finish(JobState::Failed, {"failed", {{"code", to_string(e.code())}, {"message", e.what()}}});
  } catch (const std::exception& e) {
    {
      std::lock_guard lock(jobs_mutex_);
      job.info.error_code = "Internal";
    }
    finish(JobState::Failed, {"failed", {{"code", "Internal"}, {"message", e.what()}}});
  }
}

Answer Service::query_once(const std::string& corpus_name, const std::string& text,
                           const RetrievalOverrides& overrides) {
  const auto corpus = find_corpus(corpus_name);
  PromptBundle bundle;
  {
    std::shared_lock lock(corpus->mutex);
    if (corpus->state != CorpusState::Vectorized || !corpus->store) {
      throw Error(ErrorCode::CorpusNotReady, corpus_name);
    }
    auto params = resolve({}, overrides);
    if (corpus->store->size() == 0) {
      params.use_ann = false;
    }
    const auto hits =
        retrieve(*corpus->store, text, params, *embedder_for(corpus->store->meta().embedder));
    bundle = assemble_prompt(hits, text, config_.budget);
  }
  return generate(bundle, *backend_);
}

}  // namespace rag
