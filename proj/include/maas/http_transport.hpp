#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>

namespace maas {

using HttpHeaders = std::map<std::string, std::string>;

struct HttpResponse {
  int status = 0;  // 0 means the request never got a response
  std::string body;
  std::string error;
};

// Minimal POST-only transport so backends can be tested against canned replies.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body, const HttpHeaders& headers) = 0;
};

// cpp-httplib client bound to one base URL (scheme://host[:port]).
class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(60));
  HttpResponse post(const std::string& path, const std::string& body, const HttpHeaders& headers) override;

 private:
  std::string base_url_;
  std::chrono::seconds timeout_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{1000};
  // Injectable so tests do not sleep.
  std::function<void(std::chrono::milliseconds)> sleep;
};

// POST with exponential backoff (base_delay * 2^attempt). Connection failures,
// 429 and 5xx are retried; other 4xx fail immediately. Throws
// Error(BackendUnavailable) once attempts are exhausted; returns the 2xx body.
std::string post_with_retry(HttpTransport& transport, const std::string& path, const std::string& body,
                            const HttpHeaders& headers, const RetryPolicy& policy, int* attempts_used = nullptr);

// Connection settings shared by the live chat backend, the remote embedder
// and the LLM mutator. Defaults come from MAAS_BASE_URL / MAAS_API_KEY.
struct BackendConfig {
  std::string base_url = "https://api.openai.com";
  std::string api_key;
  RetryPolicy retry;
  int max_in_flight = 4;

  static BackendConfig from_env();
  HttpHeaders auth_headers() const;
};

}  // namespace maas
