#include "maas/synthetic_env.hpp"

#include <algorithm>
#include <fstream>

#include "maas/error.hpp"

namespace maas {

void to_json(nlohmann::json& j, const SyntheticOperatorProfile& p) {
  j = {{"operator_id", p.operator_id},
       {"base_success", p.base_success},
       {"difficulty_slope", p.difficulty_slope},
       {"unit_cost", p.unit_cost},
       {"combine_bonus", p.combine_bonus}};
  if (p.prompt_marker) {
    j["prompt_marker"] = *p.prompt_marker;
    j["unmarked_base_success"] = p.unmarked_base_success;
  }
}

void from_json(const nlohmann::json& j, SyntheticOperatorProfile& p) {
  p.operator_id = j.at("operator_id").get<std::string>();
  p.base_success = j.at("base_success").get<double>();
  p.difficulty_slope = j.at("difficulty_slope").get<double>();
  p.unit_cost = j.at("unit_cost").get<double>();
  p.combine_bonus = j.at("combine_bonus").get<double>();
  p.prompt_marker.reset();
  if (j.contains("prompt_marker")) p.prompt_marker = j["prompt_marker"].get<std::string>();
  p.unmarked_base_success = j.value("unmarked_base_success", 0.0);
  if (!(p.unit_cost > 0.0)) throw Error(Errc::InvalidConfig, "profile '" + p.operator_id + "' unit_cost must be > 0");
  if (p.base_success < 0.0 || p.base_success > 1.0 || p.combine_bonus < 0.0 || p.combine_bonus > 1.0)
    throw Error(Errc::InvalidConfig, "profile '" + p.operator_id + "' probabilities must lie in [0, 1]");
}

std::vector<SyntheticOperatorProfile> load_profiles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open profile file " + path);
  try {
    return nlohmann::json::parse(in).get<std::vector<SyntheticOperatorProfile>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, path + ": " + e.what());
  }
}

double success_probability(const SyntheticOperatorProfile& profile, const OperatorSpec& op, const QueryRecord& query,
                           std::span<const std::string> predecessor_outputs) {
  if (profile.prompt_marker && op.prompt.find(*profile.prompt_marker) == std::string::npos)
    return std::clamp(profile.unmarked_base_success, 0.0, 1.0);
  const double base = profile.base_success;
  const bool helped = std::any_of(predecessor_outputs.begin(), predecessor_outputs.end(),
                                  [&](const std::string& o) { return o == query.answer; });
  const double p = base - profile.difficulty_slope * query.difficulty + (helped ? profile.combine_bonus : 0.0);
  return std::clamp(p, 0.0, 1.0);
}

std::pair<std::string, double> synthetic_evaluate(const SyntheticOperatorProfile& profile, const OperatorSpec& op,
                                                  const QueryRecord& query,
                                                  std::span<const std::string> predecessor_outputs, Rng& rng) {
  const double p = success_probability(profile, op, query, predecessor_outputs);
  const bool ok = rng.uniform01() < p;
  return {ok ? query.answer : "WRONG:" + op.id, profile.unit_cost};
}

SyntheticEnvironment::SyntheticEnvironment(std::vector<SyntheticOperatorProfile> profiles, Checker checker)
    : checker_(checker) {
  for (auto& p : profiles) {
    const auto id = p.operator_id;
    if (!profiles_.emplace(id, std::move(p)).second)
      throw Error(Errc::InvalidConfig, "duplicate synthetic profile for '" + id + "'");
  }
}

const SyntheticOperatorProfile& SyntheticEnvironment::profile_for(const std::string& op_id) const {
  std::string id = op_id;
  while (true) {
    if (auto it = profiles_.find(id); it != profiles_.end()) return it->second;
    if (id.size() > 2 && id.ends_with("-b")) {
      id.resize(id.size() - 2);
      continue;
    }
    throw Error(Errc::UnknownOperatorProfile, "no synthetic profile for operator '" + op_id + "'");
  }
}

NodeResult SyntheticEnvironment::run_node(const OperatorSpec& op, const QueryRecord& query,
                                          std::span<const std::string> predecessor_outputs, Rng& rng) const {
  auto [output, cost] = synthetic_evaluate(profile_for(op.id), op, query, predecessor_outputs, rng);
  return {std::move(output), cost, op.agent_count};
}

double SyntheticEnvironment::evaluate(std::string_view answer, const QueryRecord& query) const {
  return evaluate_answer(answer, query.answer, checker_);
}

}  // namespace maas
