#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "maas/operator_registry.hpp"
#include "maas/rng.hpp"
#include "maas/sampler.hpp"

namespace maas {

struct QueryRecord {
  std::string id;
  std::string query;
  std::string answer;
  std::string domain;
  double difficulty = 0.0;

  bool operator==(const QueryRecord&) const = default;
};

enum class Checker { exact_match, numeric };

Checker checker_from_string(std::string_view s);
std::string_view to_string(Checker c) noexcept;

// 1.0 on match, else 0.0. `numeric` strips whitespace, a leading '+' and
// trailing zeros, then compares as decimals within 1e-6; unparseable -> 0.
double evaluate_answer(std::string_view final_answer, std::string_view oracle, Checker checker);

struct NodeResult {
  std::string output;
  double cost = 0.0;
  int llm_calls = 0;
};

// Backend that runs one operator instance. Implementations must allow
// concurrent calls from different traces.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual NodeResult run_node(const OperatorSpec& op, const QueryRecord& query,
                              std::span<const std::string> predecessor_outputs, Rng& rng) const = 0;
  // Utility of an answer text against the oracle answer.
  virtual double evaluate(std::string_view answer, const QueryRecord& query) const = 0;
};

struct ExecutionTrace {
  Architecture architecture;
  std::map<std::string, std::string> node_outputs;
  std::map<std::string, double> node_utilities;
  std::vector<std::string> execution_order;  // node names; index is the node's sequence number
  std::string final_answer;
  double utility = 0.0;
  double cost = 0.0;
  int llm_calls = 0;
};

// Runs the layers in order (nodes within a layer in selection order); each
// node sees the query plus every predecessor's output. The sink takes a
// majority vote over whitespace-normalized final-layer outputs, breaking ties
// toward the lowest operator index.
ExecutionTrace execute(const Architecture& arch, const OperatorRegistry& registry, const QueryRecord& query,
                       const Environment& env, Rng& rng);

std::string aggregate_majority(std::span<const std::string> outputs, std::span<const std::size_t> op_indices);

}  // namespace maas
