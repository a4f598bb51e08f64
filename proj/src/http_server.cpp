#include "rag/http_server.hpp"

#include <httplib.h>

#include "rag/errors.hpp"

namespace rag {
namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status_for(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) {
    return nlohmann::json::object();
  }
  auto body = nlohmann::json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw Error(ErrorCode::BadRequest, "body must be a JSON object");
  }
  return body;
}

std::string required_string(const nlohmann::json& body, const char* key) {
  const auto it = body.find(key);
  if (it == body.end() || !it->is_string()) {
    throw Error(ErrorCode::BadRequest, std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

std::uint64_t parse_job_id(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto id = std::stoull(text, &used);
    if (used == text.size()) {
      return id;
    }
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::JobNotFound, text);
}

std::string format_event(const StreamEvent& event) {
  return "event: " + event.type + "\ndata: " + event.data.dump() + "\n\n";
}

// Wraps a handler so library errors become JSON error responses.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const nlohmann::json::exception& e) {
      send_json(res, 400, {{"error", "BadRequest"}, {"message", e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", "Internal"}, {"message", e.what()}});
    }
  };
}

}  // namespace

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::CorpusNotFound:
    case ErrorCode::SessionNotFound:
    case ErrorCode::JobNotFound:
    case ErrorCode::FileNotFound:
      return 404;
    case ErrorCode::CorpusExists:
    case ErrorCode::WrongState:
    case ErrorCode::CorpusNotReady:
    case ErrorCode::StaleIndex:
    case ErrorCode::EmbedderMismatch:
      return 409;
    case ErrorCode::Unauthorized:
      return 401;
    case ErrorCode::BackendUnavailable:
      return 502;
    case ErrorCode::GenerationTimeout:
      return 504;
    case ErrorCode::CorruptStore:
    case ErrorCode::IncompatibleVersion:
    case ErrorCode::IoError:
      return 500;
    default:
      return 400;
  }
}

HttpServer::HttpServer(Service& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  // Event streams hold a worker for their whole lifetime.
  server_->new_task_queue = [] { return new httplib::ThreadPool(64); };
  install_routes();
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

int HttpServer::bind_to_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool HttpServer::listen_after_bind() { return server_->listen_after_bind(); }

void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }

void HttpServer::stop() {
  if (server_->is_running()) {
    server_->stop();
  }
}

void HttpServer::install_routes() {
  auto& svc = service_;
  auto& srv = *server_;

  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Authorization, Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  if (const auto& token = svc.config().auth_token) {
    // Browsers cannot set headers on an EventSource, so the token may also
    // arrive as ?access_token=.
    srv.set_pre_routing_handler([token = *token](const httplib::Request& req, httplib::Response& res) {
      if (req.method == "OPTIONS") {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      const bool ok = req.get_header_value("Authorization") == "Bearer " + token ||
                      (req.has_param("access_token") && req.get_param_value("access_token") == token);
      if (!ok) {
        send_error(res, Error(ErrorCode::Unauthorized, "missing or wrong bearer token"));
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
  }

  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  srv.Post("/corpora", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    send_json(res, 201, corpus_to_json(svc.create_corpus(required_string(body, "name"))));
  }));

  srv.Get("/corpora", guarded([&svc](const httplib::Request&, httplib::Response& res) {
    auto out = nlohmann::json::array();
    for (const auto& info : svc.list_corpora()) {
      out.push_back(corpus_to_json(info));
    }
    send_json(res, 200, {{"corpora", std::move(out)}});
  }));

  srv.Get("/corpora/:name", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, corpus_to_json(svc.corpus_info(req.path_params.at("name"))));
  }));

  srv.Post("/corpora/:name/documents",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const auto& name = req.path_params.at("name");
             IngestReport report;
             if (req.is_multipart_form_data()) {
               std::vector<std::pair<std::string, std::string>> files;
               std::optional<std::string> manifest;
               for (const auto& [field, item] : req.files) {
                 if (field == "manifest") {
                   manifest = item.content;
                 } else {
                   files.emplace_back(item.filename.empty() ? field : item.filename, item.content);
                 }
               }
               report = svc.add_uploaded_files(name, files, manifest);
             } else {
               report = svc.add_documents(name, req.body, svc.config().ingest_root);
             }
             auto errors = nlohmann::json::array();
             for (const auto& e : report.errors) {
               errors.push_back({{"id", e.id}, {"error", e.code}, {"message", e.message}});
             }
             send_json(res, 200,
                       {{"added", report.added},
                        {"errors", std::move(errors)},
                        {"document_count", report.document_count}});
           }));

  srv.Post("/corpora/:name/vectorize",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             auto params = svc.config().chunk_params;
             params.chunk_size = body.value("chunk_size", params.chunk_size);
             params.overlap = body.value("overlap", params.overlap);
             auto spec = svc.config().embedder;
             if (body.contains("embedder")) {
               spec.id = body["embedder"].get<std::string>();
             }
             spec.dim = body.value("dim", spec.dim);
             const auto meta = svc.vectorize(req.path_params.at("name"), params, spec);
             CorpusInfo info = svc.corpus_info(req.path_params.at("name"));
             info.store = meta;
             send_json(res, 200, corpus_to_json(info));
           }));

  srv.Post("/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto s = svc.create_session(required_string(body, "corpus"), overrides_from_json(body));
    send_json(res, 201, {{"session_id", s.session_id}, {"corpus", s.corpus}});
  }));

  srv.Get("/sessions/:id", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, session_to_json(svc.session(req.path_params.at("id"))));
  }));

  srv.Get("/sessions/:id/history",
          guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            auto s = svc.session(req.path_params.at("id"));
            send_json(res, 200, session_to_json(s)["history"]);
          }));

  srv.Post("/sessions/:id/corpus",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             const auto s = svc.switch_corpus(req.path_params.at("id"), required_string(body, "corpus"));
             send_json(res, 200, {{"session_id", s.session_id}, {"corpus", s.corpus}});
           }));

  srv.Post("/sessions/:id/query",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             const auto job_id = svc.submit_query(req.path_params.at("id"),
                                                  required_string(body, "text"),
                                                  overrides_from_json(body));
             send_json(res, 202, {{"job_id", job_id}});
           }));

  srv.Get("/jobs/:id", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, job_to_json(svc.job(parse_job_id(req.path_params.at("id")))));
  }));

  srv.Get("/jobs/:id/stream", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const auto job_id = parse_job_id(req.path_params.at("id"));
    svc.job(job_id);  // JobNotFound before committing to a stream
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [&svc, job_id, cursor = std::size_t{0}](std::size_t,
                                                                    httplib::DataSink& sink) mutable {
          std::vector<StreamEvent> batch;
          const bool finished = svc.read_events(job_id, cursor, batch, std::chrono::seconds(1));
          std::string out;
          for (const auto& event : batch) {
            out += format_event(event);
          }
          if (out.empty()) {
            out = ": keep-alive\n\n";
          }
          if (!sink.write(out.data(), out.size())) {
            return false;
          }
          if (finished) {
            sink.done();
          }
          return true;
        });
  }));
}

}  // namespace rag
