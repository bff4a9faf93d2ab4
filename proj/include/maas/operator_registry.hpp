#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace maas {

enum class OperatorKind { generative, aggregator, early_exit, direct_io };

std::string_view to_string(OperatorKind kind) noexcept;
OperatorKind operator_kind_from_string(std::string_view s);

// One agentic operator: an LLM invocation block with its prompt template,
// model binding, sampling temperature, tools and internal call count.
struct OperatorSpec {
  std::string id;
  std::string name;
  std::string prompt;  // may contain an `{input}` placeholder
  std::string model_binding;
  double temperature = 1.0;
  std::vector<std::string> tools;
  int agent_count = 1;
  std::string profile_text;
  OperatorKind kind = OperatorKind::generative;
  // Set by a `rewire` patch; the DAG builder adds source->operator skip edges.
  bool rewire = false;

  bool operator==(const OperatorSpec&) const = default;
};

enum class StructureAction { none, split, merge, rewire };

struct OperatorPatch {
  std::string target_id;
  std::optional<std::string> new_prompt;
  std::optional<double> new_temperature;
  StructureAction structure_action = StructureAction::none;
  std::string merge_with;  // partner id when structure_action == merge
  std::string rationale;

  bool operator==(const OperatorPatch&) const = default;
};

// How operator indices moved after a structural patch. Controllers use this to
// remap their output rows.
struct IndexChange {
  enum class Kind { none, split, merge } kind = Kind::none;
  std::size_t parent = 0;   // split: cloned operator
  std::size_t added = 0;    // split: index of the clone (always the last one)
  std::size_t removed = 0;  // merge: index of the absorbed operator
};

// Ordered operator set. Insertion order is the canonical operator index used by
// the controller, sampler and executor.
class OperatorRegistry {
 public:
  OperatorRegistry() = default;

  std::size_t size() const noexcept { return ops_.size(); }
  bool empty() const noexcept { return ops_.empty(); }
  const OperatorSpec& operator[](std::size_t i) const { return ops_[i]; }
  const std::vector<OperatorSpec>& operators() const noexcept { return ops_; }
  auto begin() const noexcept { return ops_.begin(); }
  auto end() const noexcept { return ops_.end(); }

  std::optional<std::size_t> index_of(std::string_view id) const noexcept;
  const OperatorSpec& at(std::string_view id) const;

  // Throw InvalidOperator unless exactly one early_exit and one direct_io exist.
  void require_complete() const;
  std::size_t exit_index() const;
  std::size_t direct_io_index() const;

  bool operator==(const OperatorRegistry&) const = default;

  friend OperatorRegistry register_operator(OperatorRegistry registry, OperatorSpec spec);
  struct Patched;
  friend Patched apply_patch(const OperatorRegistry& registry, const OperatorPatch& patch);

 private:
  std::vector<OperatorSpec> ops_;
};

struct OperatorRegistry::Patched {
  OperatorRegistry registry;
  IndexChange change;
};

// The shipped operator catalog: CoT, LLM-Debate, Self-Consistency, Self-Refine,
// Ensemble, Testing, ReAct, early exit and direct I/O, in that index order.
std::vector<OperatorSpec> builtin_catalog();
OperatorRegistry builtin_registry();

void validate_operator(const OperatorSpec& spec);
void validate_patch(const OperatorPatch& patch);

OperatorRegistry register_operator(OperatorRegistry registry, OperatorSpec spec);
OperatorRegistry::Patched apply_patch(const OperatorRegistry& registry, const OperatorPatch& patch);

// Substitute `{input}` in a prompt template.
std::string render_prompt(const OperatorSpec& op, std::string_view input);

void to_json(nlohmann::json& j, const OperatorSpec& spec);
void from_json(const nlohmann::json& j, OperatorSpec& spec);
void to_json(nlohmann::json& j, const OperatorPatch& patch);
void from_json(const nlohmann::json& j, OperatorPatch& patch);
nlohmann::json registry_to_json(const OperatorRegistry& registry);
OperatorRegistry registry_from_json(const nlohmann::json& j);

}  // namespace maas
