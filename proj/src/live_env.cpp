#include "maas/live_env.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "json.hpp"
#include "maas/error.hpp"

namespace maas {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

LiveCallResult parse_chat_response(std::string_view body) {
  try {
    const auto j = nlohmann::json::parse(body);
    LiveCallResult r;
    r.content = j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (j.contains("usage")) {
      r.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
      r.completion_tokens = j["usage"].value("completion_tokens", 0L);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedResponse, std::string("chat completion: ") + e.what());
  }
}

LiveCallResult live_call(const OperatorSpec& op, const std::string& rendered_prompt, const BackendConfig& backend,
                         HttpTransport& transport) {
  nlohmann::json messages = nlohmann::json::array();
  if (!op.tools.empty()) {
    std::string tools = "You may use the following tools: ";
    for (std::size_t i = 0; i < op.tools.size(); ++i) tools += (i ? ", " : "") + op.tools[i];
    tools += ".";
    messages.push_back({{"role", "system"}, {"content", tools}});
  }
  messages.push_back({{"role", "user"}, {"content", rendered_prompt}});
  const nlohmann::json req = {{"model", op.model_binding}, {"temperature", op.temperature}, {"messages", messages}};
  const auto body = post_with_retry(transport, "/v1/chat/completions", req.dump(), backend.auth_headers(), backend.retry);
  return parse_chat_response(body);
}

std::string extract_answer(std::string_view text) {
  static constexpr std::string_view kMarker = "Answer:";
  if (auto pos = text.rfind(kMarker); pos != std::string_view::npos) {
    auto rest = text.substr(pos + kMarker.size());
    return trim(rest.substr(0, rest.find('\n')));
  }
  std::string last;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = trim(text.substr(start, end - start));
    if (!line.empty()) last = std::move(line);
    start = end + 1;
  }
  return last;
}

LiveEnvironment::LiveEnvironment(BackendConfig backend, std::shared_ptr<HttpTransport> transport, Checker checker)
    : backend_(std::move(backend)),
      transport_(std::move(transport)),
      checker_(checker),
      in_flight_(std::clamp(backend_.max_in_flight, 1, 1024)) {}

NodeResult LiveEnvironment::run_node(const OperatorSpec& op, const QueryRecord& query,
                                     std::span<const std::string> predecessor_outputs, Rng& /*rng*/) const {
  std::string input = query.query;
  if (!predecessor_outputs.empty()) {
    input += "\n\nOutputs from previous agents:";
    for (const auto& o : predecessor_outputs) input += "\n---\n" + o;
  }
  const std::string prompt = render_prompt(op, input);

  NodeResult out;
  std::vector<std::string> contents;
  std::map<std::string, int> votes;
  for (int i = 0; i < op.agent_count; ++i) {
    in_flight_.acquire();
    LiveCallResult r;
    try {
      r = live_call(op, prompt, backend_, *transport_);
    } catch (...) {
      in_flight_.release();
      throw;
    }
    in_flight_.release();
    // Some servers omit usage; count such a call as one token so costs stay positive.
    out.cost += static_cast<double>(std::max(r.total_tokens(), 1L));
    ++out.llm_calls;
    ++votes[extract_answer(r.content)];
    contents.push_back(std::move(r.content));
  }
  // First response carrying the most common answer.
  int best = -1;
  for (const auto& c : contents) {
    const int v = votes[extract_answer(c)];
    if (v > best) {
      best = v;
      out.output = c;
    }
  }
  return out;
}

double LiveEnvironment::evaluate(std::string_view answer, const QueryRecord& query) const {
  return evaluate_answer(extract_answer(answer), query.answer, checker_);
}

}  // namespace maas
