#pragma once

#include <string>
#include <string_view>

namespace rag {

/// `http://host:port/path` split into the parts cpp-httplib wants.
struct HttpUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // at least "/"
};

/// Throws Error(BadRequest) for anything that is not http(s)://host...
HttpUrl parse_http_url(std::string_view url);

}  // namespace rag
