#pragma once

#include <cstdlib>
#include <string>
#include <utility>

#include <httplib.h>
// <resolv.h>, reached through httplib, defines _res as a macro; Eigen uses
// that name for function parameters.
#undef _res

#include "newsalpha/core/error.hpp"

namespace newsalpha::http {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // "/..." (defaults to "/")
};

inline Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint lacks scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline std::string env_secret(const std::string& var) {
  if (var.empty()) return {};
  const char* v = std::getenv(var.c_str());
  if (v == nullptr || *v == '\0') {
    throw AuthError("environment variable " + var + " is not set");
  }
  return v;
}

// Maps transport failures and non-2xx statuses onto the library's error types.
inline void check_response(const httplib::Result& res, const std::string& what) {
  if (!res) {
    throw NetworkError(what + ": " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status >= 200 && status < 300) return;
  if (status == 401 || status == 403) {
    throw AuthError(what + ": HTTP " + std::to_string(status));
  }
  if (status == 429) {
    double retry_after = 0.0;
    if (res->has_header("Retry-After")) {
      retry_after = std::atof(res->get_header_value("Retry-After").c_str());
    }
    throw RateLimited(retry_after, what + ": HTTP 429");
  }
  throw NetworkError(what + ": HTTP " + std::to_string(status));
}

}  // namespace newsalpha::http
