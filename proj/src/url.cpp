#include "rag/url.hpp"

#include "rag/errors.hpp"

namespace rag {

HttpUrl parse_http_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(ErrorCode::BadRequest, "not an absolute URL: " + std::string(url));
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::BadRequest, "unsupported scheme: " + std::string(scheme));
  }
  const auto host_start = scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  HttpUrl out;
  if (path_start == std::string_view::npos) {
    out.origin = std::string(url);
    out.path = "/";
  } else {
    out.origin = std::string(url.substr(0, path_start));
    out.path = std::string(url.substr(path_start));
  }
  if (out.origin.size() == host_start) {
    throw Error(ErrorCode::BadRequest, "missing host: " + std::string(url));
  }
  return out;
}

}  // namespace rag
