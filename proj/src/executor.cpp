#include "maas/executor.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "maas/error.hpp"

namespace maas {

Checker checker_from_string(std::string_view s) {
  if (s == "exact_match" || s == "exact") return Checker::exact_match;
  if (s == "numeric") return Checker::numeric;
  throw Error(Errc::InvalidConfig, "unknown checker '" + std::string(s) + "'");
}

std::string_view to_string(Checker c) noexcept { return c == Checker::numeric ? "numeric" : "exact_match"; }

namespace {

std::string strip_spaces(std::string_view s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}

std::optional<double> parse_decimal(std::string_view raw) {
  std::string s = strip_spaces(raw);
  if (!s.empty() && s.front() == '+') s.erase(0, 1);
  if (s.find('.') != std::string::npos) {
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
  }
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string normalize_vote(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace

double evaluate_answer(std::string_view final_answer, std::string_view oracle, Checker checker) {
  if (checker == Checker::exact_match) return final_answer == oracle ? 1.0 : 0.0;
  const auto a = parse_decimal(final_answer);
  const auto b = parse_decimal(oracle);
  if (!a || !b) return 0.0;
  return std::abs(*a - *b) <= 1e-6 ? 1.0 : 0.0;
}

std::string aggregate_majority(std::span<const std::string> outputs, std::span<const std::size_t> op_indices) {
  if (outputs.empty()) throw Error(Errc::EmptyArchitecture, "nothing to aggregate");
  struct Group {
    std::size_t count = 0;
    std::size_t min_op = SIZE_MAX;
    std::size_t representative = 0;  // position of the lowest-index member
  };
  std::map<std::string, Group> groups;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    auto& g = groups[normalize_vote(outputs[i])];
    ++g.count;
    if (op_indices[i] < g.min_op) {
      g.min_op = op_indices[i];
      g.representative = i;
    }
  }
  const Group* best = nullptr;
  for (const auto& [key, g] : groups)
    if (!best || g.count > best->count || (g.count == best->count && g.min_op < best->min_op)) best = &g;
  return outputs[best->representative];
}

ExecutionTrace execute(const Architecture& arch, const OperatorRegistry& registry, const QueryRecord& query,
                       const Environment& env, Rng& rng) {
  if (arch.layers.empty()) throw Error(Errc::EmptyArchitecture, "architecture has no layers");
  ExecutionTrace trace;
  trace.architecture = arch;

  std::vector<std::string> prev_outputs;
  std::vector<std::size_t> prev_indices;
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    std::vector<std::string> outputs;
    std::vector<std::size_t> indices;
    for (const auto& id : arch.layers[l]) {
      const auto idx = registry.index_of(id);
      if (!idx) throw Error(Errc::UnknownTarget, "architecture references unknown operator '" + id + "'");
      const auto& op = registry[*idx];
      if (op.kind == OperatorKind::early_exit)
        throw Error(Errc::EmptyArchitecture, "the early-exit operator cannot be executed");
      NodeResult r = env.run_node(op, query, prev_outputs, rng);
      const std::string name = node_name(l + 1, id);
      trace.cost += r.cost;
      trace.llm_calls += r.llm_calls;
      trace.node_utilities[name] = env.evaluate(r.output, query);
      trace.node_outputs[name] = r.output;
      trace.execution_order.push_back(name);
      outputs.push_back(std::move(r.output));
      indices.push_back(*idx);
    }
    prev_outputs = std::move(outputs);
    prev_indices = std::move(indices);
  }
  trace.final_answer = aggregate_majority(prev_outputs, prev_indices);
  trace.utility = env.evaluate(trace.final_answer, query);
  return trace;
}

}  // namespace maas
