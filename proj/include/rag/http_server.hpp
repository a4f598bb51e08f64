#pragma once

#include <memory>
#include <string>

#include "rag/errors.hpp"
#include "rag/service.hpp"

namespace httplib {
class Server;
}

namespace rag {

/// HTTP + server-sent-events front end for a Service.
///
///   POST /corpora {name}                  GET /corpora, GET /corpora/{name}
///   POST /corpora/{name}/documents        JSONL manifest body or multipart files
///   POST /corpora/{name}/vectorize        {chunk_size?, overlap?, embedder?, dim?}
///   POST /sessions {corpus, top_n?, min_score?, filter?, use_ann?} -> {session_id}
///   GET  /sessions/{id}, GET /sessions/{id}/history
///   POST /sessions/{id}/corpus {corpus}
///   POST /sessions/{id}/query {text, top_n?, min_score?, filter?, use_ann?} -> {job_id}
///   GET  /jobs/{id}, GET /jobs/{id}/stream (text/event-stream)
///
/// Errors come back as {"error": code, "message": text}. When the service
/// has an auth token every request needs `Authorization: Bearer <token>`
/// or an `access_token` query parameter. CORS is open.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and serves until stop(); returns false if the bind failed.
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it (negative on failure); serve
  /// with listen_after_bind().
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

 private:
  void install_routes();

  Service& service_;
  std::unique_ptr<httplib::Server> server_;
};

/// Maps error codes to HTTP status codes.
int http_status_for(ErrorCode code);

}  // namespace rag
