#include "maas/operator_registry.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "maas/error.hpp"

namespace maas {

std::string_view to_string(OperatorKind kind) noexcept {
  switch (kind) {
    case OperatorKind::generative: return "generative";
    case OperatorKind::aggregator: return "aggregator";
    case OperatorKind::early_exit: return "early_exit";
    case OperatorKind::direct_io: return "direct_io";
  }
  return "generative";
}

OperatorKind operator_kind_from_string(std::string_view s) {
  if (s == "generative") return OperatorKind::generative;
  if (s == "aggregator") return OperatorKind::aggregator;
  if (s == "early_exit") return OperatorKind::early_exit;
  if (s == "direct_io") return OperatorKind::direct_io;
  throw Error(Errc::InvalidOperator, "unknown operator kind '" + std::string(s) + "'");
}

namespace {

constexpr const char* kDefaultModel = "gpt-4o-mini";

bool valid_temperature(double t) { return std::isfinite(t) && t >= 0.0 && t <= 2.0; }

}  // namespace

std::vector<OperatorSpec> builtin_catalog() {
  std::vector<OperatorSpec> ops;
  ops.push_back({
      .id = "cot",
      .name = "Chain-of-Thought",
      .prompt = "Solve the following problem. Think step by step and show your intermediate reasoning, "
                "then give the final result on its own line as 'Answer: <answer>'.\n\n{input}",
      .model_binding = kDefaultModel,
      .temperature = 1.0,
      .tools = {},
      .agent_count = 1,
      .profile_text = "Chain-of-thought reasoning: a single agent thinks step by step through intermediate "
                      "reasoning steps before committing to an answer, improving multi-step arithmetic and "
                      "logical problems and making the decision process transparent.",
      .kind = OperatorKind::generative,
  });
  ops.push_back({
      .id = "debate",
      .name = "LLM-Debate",
      .prompt = "You are one of three debaters. Propose a solution to the problem, critique the other "
                "debaters' arguments when they are given, and revise your position. End with "
                "'Answer: <answer>'.\n\n{input}",
      .model_binding = kDefaultModel,
      .temperature = 1.0,
      .tools = {},
      .agent_count = 3,
      .profile_text = "Multi-agent debate: three debater agents argue over up to two rounds, exposing "
                      "flaws in each other's reasoning and converging on a better solution through diverse "
                      "perspectives.",
      .kind = OperatorKind::aggregator,
  });
  ops.push_back({
      .id = "self_consistency",
      .name = "Self-Consistency",
      .prompt = "Solve the problem with careful step-by-step reasoning. End with 'Answer: <answer>'.\n\n{input}",
      .model_binding = kDefaultModel,
      .temperature = 1.0,
      .tools = {},
      .agent_count = 5,
      .profile_text = "Self-consistency ensemble: samples five independent chain-of-thought reasoning paths "
                      "and returns the answer that appears most frequently by majority voting, reducing "
                      "variance from any single sampled path.",
      .kind = OperatorKind::aggregator,
  });
  ops.push_back({
      .id = "self_refine",
      .name = "Self-Refine",
      .prompt = "Draft a solution to the problem, then critique your draft and refine it. Repeat the "
                "critique-and-refine cycle until no errors remain. End with 'Answer: <answer>'.\n\n{input}",
      .model_binding = kDefaultModel,
      .temperature = 1.0,
      .tools = {},
      .agent_count = 6,
      .profile_text = "Iterative self-refinement: generates an initial chain-of-thought answer and then "
                      "reflects on and revises it for up to five feedback iterations, fixing mistakes found "
                      "during self-critique.",
      .kind = OperatorKind::generative,
  });
  ops.push_back({
      .id = "ensemble",
      .name = "Ensemble",
      .prompt = "Answer the problem independently. Your answer will be ranked pairwise against answers "
                "from other models and fused into a final solution. End with 'Answer: <answer>'.\n\n{input}",
      .model_binding = kDefaultModel,
      .temperature = 1.0,
      .tools = {},
      .agent_count = 3,
      .profile_text = "Model ensemble with pairwise ranking: three agents backed by different models answer "
                      "the same query, their candidates are compared pairwise, and the best ones are fused "
                      "into one response.",
      .kind = OperatorKind::aggregator,
  });
  ops.push_back({
      .id = "testing",
      .name = "Testing",
      .prompt = "Write test cases for the candidate solution of the problem below, run them mentally, "
                "and report a corrected solution. End with 'Answer: <answer>'.\n\n{input}",
      .model_binding = kDefaultModel,
      .temperature = 1.0,
      .tools = {},
      .agent_count = 1,
      .profile_text = "Test designer: writes unit test cases covering normal and edge conditions for "
                      "generated code, checks the candidate program against them, and repairs failures.",
      .kind = OperatorKind::generative,
  });
  ops.push_back({
      .id = "react",
      .name = "ReAct",
      .prompt = "Interleave reasoning and actions to solve the problem. You may call the listed tools; "
                "write Thought, Action and Observation steps. End with 'Answer: <answer>'.\n\n{input}",
      .model_binding = kDefaultModel,
      .temperature = 1.0,
      .tools = {"code_interpreter", "web_search", "knowledge_base"},
      .agent_count = 1,
      .profile_text = "Reasoning and acting agent: alternates thoughts with tool calls such as a code "
                      "interpreter, web search and an external knowledge base, grounding its answer in "
                      "observations from the environment.",
      .kind = OperatorKind::generative,
  });
  ops.push_back({
      .id = "exit",
      .name = "Early Exit",
      .prompt = "",
      .model_binding = "",
      .temperature = 1.0,
      .tools = {},
      .agent_count = 1,
      .profile_text = "",
      .kind = OperatorKind::early_exit,
  });
  ops.push_back({
      .id = "direct_io",
      .name = "Direct I/O",
      .prompt = "Answer the question directly. Reply with 'Answer: <answer>'.\n\n{input}",
      .model_binding = kDefaultModel,
      .temperature = 1.0,
      .tools = {},
      .agent_count = 1,
      .profile_text = "Zero-shot input-output prompting: a single model call answers the query directly "
                      "without intermediate reasoning, the cheapest option for simple questions.",
      .kind = OperatorKind::direct_io,
  });
  return ops;
}

OperatorRegistry builtin_registry() {
  OperatorRegistry r;
  for (auto& op : builtin_catalog()) r = register_operator(std::move(r), std::move(op));
  return r;
}

void validate_operator(const OperatorSpec& spec) {
  if (spec.id.empty()) throw Error(Errc::InvalidOperator, "operator id must be non-empty");
  if (!valid_temperature(spec.temperature))
    throw Error(Errc::InvalidTemperature, "operator '" + spec.id + "' temperature outside [0, 2]");
  if (spec.agent_count < 1) throw Error(Errc::InvalidOperator, "operator '" + spec.id + "' agent_count < 1");
  std::set<std::string> seen;
  for (const auto& t : spec.tools) {
    if (!seen.insert(t).second)
      throw Error(Errc::InvalidOperator, "operator '" + spec.id + "' lists tool '" + t + "' twice");
  }
  if (spec.kind != OperatorKind::early_exit && spec.profile_text.empty())
    throw Error(Errc::InvalidOperator, "operator '" + spec.id + "' has an empty profile_text");
}

void validate_patch(const OperatorPatch& patch) {
  if (!patch.new_prompt && !patch.new_temperature && patch.structure_action == StructureAction::none)
    throw Error(Errc::InvalidPatch, "patch for '" + patch.target_id + "' changes nothing");
  if (patch.new_temperature && !valid_temperature(*patch.new_temperature))
    throw Error(Errc::InvalidTemperature, "patch temperature outside [0, 2]");
}

std::optional<std::size_t> OperatorRegistry::index_of(std::string_view id) const noexcept {
  for (std::size_t i = 0; i < ops_.size(); ++i)
    if (ops_[i].id == id) return i;
  return std::nullopt;
}

const OperatorSpec& OperatorRegistry::at(std::string_view id) const {
  auto i = index_of(id);
  if (!i) throw Error(Errc::UnknownTarget, "no operator '" + std::string(id) + "'");
  return ops_[*i];
}

namespace {

std::size_t count_kind(const std::vector<OperatorSpec>& ops, OperatorKind kind) {
  return static_cast<std::size_t>(std::count_if(ops.begin(), ops.end(), [&](const auto& o) { return o.kind == kind; }));
}

std::size_t find_kind(const std::vector<OperatorSpec>& ops, OperatorKind kind) {
  for (std::size_t i = 0; i < ops.size(); ++i)
    if (ops[i].kind == kind) return i;
  throw Error(Errc::InvalidOperator, "registry has no " + std::string(to_string(kind)) + " operator");
}

}  // namespace

void OperatorRegistry::require_complete() const {
  if (count_kind(ops_, OperatorKind::early_exit) != 1)
    throw Error(Errc::InvalidOperator, "registry needs exactly one early_exit operator");
  if (count_kind(ops_, OperatorKind::direct_io) != 1)
    throw Error(Errc::InvalidOperator, "registry needs exactly one direct_io operator");
}

std::size_t OperatorRegistry::exit_index() const { return find_kind(ops_, OperatorKind::early_exit); }
std::size_t OperatorRegistry::direct_io_index() const { return find_kind(ops_, OperatorKind::direct_io); }

OperatorRegistry register_operator(OperatorRegistry registry, OperatorSpec spec) {
  validate_operator(spec);
  if (registry.index_of(spec.id)) throw Error(Errc::DuplicateId, "operator id '" + spec.id + "' already registered");
  if (spec.kind == OperatorKind::early_exit && count_kind(registry.ops_, OperatorKind::early_exit) > 0)
    throw Error(Errc::SecondEarlyExit, "registry already has an early_exit operator");
  if (spec.kind == OperatorKind::direct_io && count_kind(registry.ops_, OperatorKind::direct_io) > 0)
    throw Error(Errc::InvalidOperator, "registry already has a direct_io operator");
  registry.ops_.push_back(std::move(spec));
  return registry;
}

OperatorRegistry::Patched apply_patch(const OperatorRegistry& registry, const OperatorPatch& patch) {
  validate_patch(patch);
  const auto target = registry.index_of(patch.target_id);
  if (!target) throw Error(Errc::UnknownTarget, "no operator '" + patch.target_id + "'");
  if (registry.ops_[*target].kind == OperatorKind::early_exit)
    throw Error(Errc::PatchOnExitOperator, "the early-exit operator cannot be patched");

  OperatorRegistry::Patched out{registry, {}};
  auto& ops = out.registry.ops_;
  OperatorSpec& op = ops[*target];
  if (patch.new_prompt) op.prompt = *patch.new_prompt;
  if (patch.new_temperature) op.temperature = *patch.new_temperature;

  switch (patch.structure_action) {
    case StructureAction::none:
      break;
    case StructureAction::rewire:
      op.rewire = true;
      break;
    case StructureAction::split: {
      if (op.kind == OperatorKind::direct_io)
        throw Error(Errc::InvalidPatch, "splitting direct_io would create a second direct_io operator");
      OperatorSpec clone = op;
      clone.id += "-b";
      clone.name += " (b)";
      if (out.registry.index_of(clone.id))
        throw Error(Errc::DuplicateId, "split clone id '" + clone.id + "' already exists");
      ops.push_back(std::move(clone));
      out.change = {IndexChange::Kind::split, *target, ops.size() - 1, 0};
      break;
    }
    case StructureAction::merge: {
      const auto partner = registry.index_of(patch.merge_with);
      if (!partner) throw Error(Errc::MergeUnknownPartner, "no merge partner '" + patch.merge_with + "'");
      if (*partner == *target) throw Error(Errc::InvalidPatch, "an operator cannot merge with itself");
      const auto partner_kind = ops[*partner].kind;
      if (partner_kind == OperatorKind::early_exit)
        throw Error(Errc::PatchOnExitOperator, "the early-exit operator cannot be merged away");
      if (partner_kind == OperatorKind::direct_io)
        throw Error(Errc::InvalidPatch, "the direct_io operator cannot be merged away");
      op.prompt += "\n" + ops[*partner].prompt;
      ops.erase(ops.begin() + static_cast<std::ptrdiff_t>(*partner));
      out.change = {IndexChange::Kind::merge, 0, 0, *partner};
      break;
    }
  }
  return out;
}

std::string render_prompt(const OperatorSpec& op, std::string_view input) {
  static constexpr std::string_view kSlot = "{input}";
  std::string out = op.prompt;
  auto pos = out.find(kSlot);
  if (pos == std::string::npos) {
    if (!out.empty()) out += "\n\n";
    out += input;
    return out;
  }
  while (pos != std::string::npos) {
    out.replace(pos, kSlot.size(), input);
    pos = out.find(kSlot, pos + input.size());
  }
  return out;
}

namespace {

std::string_view to_string(StructureAction a) {
  switch (a) {
    case StructureAction::none: return "none";
    case StructureAction::split: return "split";
    case StructureAction::merge: return "merge";
    case StructureAction::rewire: return "rewire";
  }
  return "none";
}

StructureAction structure_action_from_string(std::string_view s) {
  if (s == "none") return StructureAction::none;
  if (s == "split") return StructureAction::split;
  if (s == "merge") return StructureAction::merge;
  if (s == "rewire") return StructureAction::rewire;
  throw Error(Errc::InvalidPatch, "unknown structure action '" + std::string(s) + "'");
}

}  // namespace

void to_json(nlohmann::json& j, const OperatorSpec& spec) {
  j = nlohmann::json{{"id", spec.id},
                     {"name", spec.name},
                     {"prompt", spec.prompt},
                     {"model_binding", spec.model_binding},
                     {"temperature", spec.temperature},
                     {"tools", spec.tools},
                     {"agent_count", spec.agent_count},
                     {"profile_text", spec.profile_text},
                     {"kind", to_string(spec.kind)},
                     {"rewire", spec.rewire}};
}

void from_json(const nlohmann::json& j, OperatorSpec& spec) {
  spec.id = j.at("id").get<std::string>();
  spec.name = j.at("name").get<std::string>();
  spec.prompt = j.at("prompt").get<std::string>();
  spec.model_binding = j.at("model_binding").get<std::string>();
  spec.temperature = j.at("temperature").get<double>();
  spec.tools = j.at("tools").get<std::vector<std::string>>();
  spec.agent_count = j.at("agent_count").get<int>();
  spec.profile_text = j.at("profile_text").get<std::string>();
  spec.kind = operator_kind_from_string(j.at("kind").get<std::string>());
  spec.rewire = j.value("rewire", false);
}

void to_json(nlohmann::json& j, const OperatorPatch& patch) {
  j = nlohmann::json{{"target_id", patch.target_id},
                     {"structure_action", to_string(patch.structure_action)},
                     {"rationale", patch.rationale}};
  if (patch.new_prompt) j["new_prompt"] = *patch.new_prompt;
  if (patch.new_temperature) j["new_temperature"] = *patch.new_temperature;
  if (patch.structure_action == StructureAction::merge) j["merge_with"] = patch.merge_with;
}

void from_json(const nlohmann::json& j, OperatorPatch& patch) {
  patch.target_id = j.at("target_id").get<std::string>();
  patch.new_prompt.reset();
  patch.new_temperature.reset();
  if (j.contains("new_prompt") && !j["new_prompt"].is_null()) patch.new_prompt = j["new_prompt"].get<std::string>();
  if (j.contains("new_temperature") && !j["new_temperature"].is_null())
    patch.new_temperature = j["new_temperature"].get<double>();
  patch.structure_action = structure_action_from_string(j.value("structure_action", std::string("none")));
  patch.merge_with = j.value("merge_with", std::string());
  patch.rationale = j.value("rationale", std::string());
}

nlohmann::json registry_to_json(const OperatorRegistry& registry) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& op : registry) arr.push_back(op);
  return arr;
}

OperatorRegistry registry_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(Errc::InvalidOperator, "registry JSON must be an array");
  OperatorRegistry r;
  for (const auto& item : j) r = register_operator(std::move(r), item.get<OperatorSpec>());
  return r;
}

}  // namespace maas
