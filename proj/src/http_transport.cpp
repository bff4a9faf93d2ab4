#include "maas/http_transport.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "maas/error.hpp"

namespace maas {

HttplibTransport::HttplibTransport(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

HttpResponse HttplibTransport::post(const std::string& path, const std::string& body, const HttpHeaders& headers) {
  HttpResponse out;
  try {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

namespace {

bool retryable(const HttpResponse& r) { return r.status == 0 || r.status == 429 || r.status >= 500; }

}  // namespace

std::string post_with_retry(HttpTransport& transport, const std::string& path, const std::string& body,
                            const HttpHeaders& headers, const RetryPolicy& policy, int* attempts_used) {
  const int attempts = std::max(1, policy.max_attempts);
  std::string last;
  for (int i = 0; i < attempts; ++i) {
    if (i > 0) {
      const auto delay = policy.base_delay * (1 << (i - 1));
      if (policy.sleep) {
        policy.sleep(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
    }
    HttpResponse r = transport.post(path, body, headers);
    if (attempts_used) *attempts_used = i + 1;
    if (r.status >= 200 && r.status < 300) return r.body;
    last = r.status == 0 ? "connection failed: " + r.error : "HTTP " + std::to_string(r.status) + ": " + r.body;
    if (!retryable(r)) break;
  }
  throw Error(Errc::BackendUnavailable, path + " " + last);
}

BackendConfig BackendConfig::from_env() {
  BackendConfig c;
  if (const char* url = std::getenv("MAAS_BASE_URL"); url && *url) c.base_url = url;
  if (const char* key = std::getenv("MAAS_API_KEY"); key) c.api_key = key;
  return c;
}

HttpHeaders BackendConfig::auth_headers() const {
  HttpHeaders h;
  if (!api_key.empty()) h["Authorization"] = "Bearer " + api_key;
  return h;
}

}  // namespace maas
