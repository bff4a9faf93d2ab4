#pragma once

#include <memory>
#include <semaphore>
#include <string>
#include <string_view>

#include "maas/executor.hpp"
#include "maas/http_transport.hpp"

namespace maas {

struct LiveCallResult {
  std::string content;
  long prompt_tokens = 0;
  long completion_tokens = 0;

  long total_tokens() const noexcept { return prompt_tokens + completion_tokens; }
};

// One OpenAI-compatible /v1/chat/completions request using the operator's
// model binding and temperature. Tools are listed in a system message only.
// Throws Error(BackendUnavailable) after retries, Error(MalformedResponse) on
// an unparseable body.
LiveCallResult live_call(const OperatorSpec& op, const std::string& rendered_prompt, const BackendConfig& backend,
                         HttpTransport& transport);

LiveCallResult parse_chat_response(std::string_view body);

// Text after the last "Answer:" marker (first line, trimmed); falls back to the
// last non-empty line.
std::string extract_answer(std::string_view text);

class LiveEnvironment final : public Environment {
 public:
  LiveEnvironment(BackendConfig backend, std::shared_ptr<HttpTransport> transport,
                  Checker checker = Checker::exact_match);

  // Issues agent_count calls and keeps the response whose extracted answer is
  // the most common. Cost is the total token usage.
  NodeResult run_node(const OperatorSpec& op, const QueryRecord& query, std::span<const std::string> predecessor_outputs,
                      Rng& rng) const override;
  double evaluate(std::string_view answer, const QueryRecord& query) const override;

 private:
  BackendConfig backend_;
  std::shared_ptr<HttpTransport> transport_;
  Checker checker_;
  mutable std::counting_semaphore<1024> in_flight_;
};

}  // namespace maas
