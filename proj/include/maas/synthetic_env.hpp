#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "maas/executor.hpp"

namespace maas {

// Desk-scale stand-in for one operator's behavior.
struct SyntheticOperatorProfile {
  std::string operator_id;
  double base_success = 0.5;
  double difficulty_slope = 0.0;
  double unit_cost = 1.0;
  double combine_bonus = 0.0;
  // When set and the operator's prompt lacks this marker, the operator is
  // broken: its success probability is unmarked_base_success, with no slope
  // or bonus. A prompt patch adding the marker repairs it.
  std::optional<std::string> prompt_marker;
  double unmarked_base_success = 0.0;

  bool operator==(const SyntheticOperatorProfile&) const = default;
};

void to_json(nlohmann::json& j, const SyntheticOperatorProfile& p);
void from_json(const nlohmann::json& j, SyntheticOperatorProfile& p);

std::vector<SyntheticOperatorProfile> load_profiles(const std::string& path);

// clamp(base - slope * difficulty + bonus * [any predecessor correct], 0, 1),
// or the broken-operator probability when a required prompt marker is missing.
double success_probability(const SyntheticOperatorProfile& profile, const OperatorSpec& op, const QueryRecord& query,
                           std::span<const std::string> predecessor_outputs);

// With probability success_probability the output is the oracle answer, else
// "WRONG:<operator id>". Cost is the profile's unit cost.
std::pair<std::string, double> synthetic_evaluate(const SyntheticOperatorProfile& profile, const OperatorSpec& op,
                                                  const QueryRecord& query,
                                                  std::span<const std::string> predecessor_outputs, Rng& rng);

class SyntheticEnvironment final : public Environment {
 public:
  explicit SyntheticEnvironment(std::vector<SyntheticOperatorProfile> profiles, Checker checker = Checker::exact_match);

  NodeResult run_node(const OperatorSpec& op, const QueryRecord& query, std::span<const std::string> predecessor_outputs,
                      Rng& rng) const override;
  double evaluate(std::string_view answer, const QueryRecord& query) const override;

  // Profile for an operator id; split clones ("x-b", "x-b-b") inherit from "x".
  const SyntheticOperatorProfile& profile_for(const std::string& op_id) const;

 private:
  std::map<std::string, SyntheticOperatorProfile> profiles_;
  Checker checker_;
};

}  // namespace maas
