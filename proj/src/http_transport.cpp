#include <cmath>

#include "httplib.h"
#include "rmcontrast/gateway.hpp"

namespace rmcontrast {

HttpResponse HttpTransport::post(const std::string& base_url, const std::string& path,
                                 const std::string& body, const HttpHeaders& headers,
                                 double timeout_seconds) {
  const auto [origin, prefix] = split_base_url(base_url);
  httplib::Client client(origin);
  const auto secs = static_cast<time_t>(timeout_seconds);
  const auto usecs = static_cast<time_t>((timeout_seconds - std::floor(timeout_seconds)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(prefix + path, h, body, "application/json");
  if (!res) return {0, httplib::to_string(res.error())};
  return {res->status, res->body};
}

}  // namespace rmcontrast
