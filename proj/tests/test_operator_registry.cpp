#include <algorithm>
#include <set>

#include "doctest.h"
#include "maas/operator_registry.hpp"
#include "maas/rng.hpp"
#include "test_helpers.hpp"

using namespace maas;

namespace {

std::size_t count_kind(const OperatorRegistry& r, OperatorKind k) {
  return static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [&](const auto& op) { return op.kind == k; }));
}

OperatorSpec exit_spec() {
  OperatorSpec s;
  s.id = "exit";
  s.name = "Early exit";
  s.kind = OperatorKind::early_exit;
  return s;
}

}  // namespace

TEST_CASE("builtin catalog") {
  const auto r = builtin_registry();
  CHECK(r.size() == 9);
  CHECK(count_kind(r, OperatorKind::early_exit) == 1);
  CHECK(count_kind(r, OperatorKind::direct_io) == 1);
  CHECK(r.at("self_consistency").agent_count == 5);
  CHECK(r.at("debate").agent_count == 3);
  CHECK(r.at("exit").prompt.empty());
  CHECK(r.at("exit").agent_count == 1);
  CHECK(r.at("exit").tools.empty());
  CHECK(registry_to_json(builtin_registry()).dump() == registry_to_json(builtin_registry()).dump());
  for (const auto& op : r) {
    CHECK(op.temperature >= 0.0);
    CHECK(op.temperature <= 2.0);
    if (op.kind != OperatorKind::early_exit) CHECK_FALSE(op.profile_text.empty());
  }
  std::set<std::string> ids;
  for (const auto& op : r) ids.insert(op.id);
  CHECK(ids.size() == r.size());
}

TEST_CASE("register_operator") {
  auto r = register_operator(OperatorRegistry{}, exit_spec());
  CHECK(r.size() == 1);
  CHECK(r.exit_index() == 0);

  CHECK_ERRC(register_operator(builtin_registry(), builtin_registry().at("cot")), Errc::DuplicateId);
  auto second_exit = exit_spec();
  second_exit.id = "exit2";
  CHECK_ERRC(register_operator(r, second_exit), Errc::SecondEarlyExit);

  OperatorSpec hot = builtin_registry().at("cot");
  hot.id = "hot";
  hot.temperature = 2.5;
  CHECK_ERRC(register_operator(r, hot), Errc::InvalidTemperature);
  hot.temperature = -0.1;
  CHECK_ERRC(register_operator(r, hot), Errc::InvalidTemperature);
  hot.temperature = 2.0;
  CHECK(register_operator(r, hot).size() == 2);

  OperatorSpec dup_tools = hot;
  dup_tools.tools = {"web_search", "web_search"};
  CHECK_ERRC(register_operator(r, dup_tools), Errc::InvalidOperator);
  OperatorSpec blank = hot;
  blank.profile_text.clear();
  CHECK_ERRC(register_operator(r, blank), Errc::InvalidOperator);
}

TEST_CASE("apply_patch edits and structure actions") {
  const auto base = builtin_registry();
  const auto cot = *base.index_of("cot");

  SUBCASE("temperature") {
    OperatorPatch p{.target_id = "cot", .new_temperature = 0.5};
    const auto out = apply_patch(base, p);
    CHECK(out.registry.at("cot").temperature == 0.5);
    CHECK(out.registry.size() == base.size());
    CHECK(out.change.kind == IndexChange::Kind::none);
    CHECK(base.at("cot").temperature == 1.0);
  }
  SUBCASE("split appends a clone") {
    OperatorPatch p{.target_id = "cot", .structure_action = StructureAction::split};
    const auto out = apply_patch(base, p);
    CHECK(out.registry.size() == 10);
    CHECK(out.registry[9].id == "cot-b");
    CHECK(out.registry[9].profile_text == base.at("cot").profile_text);
    CHECK(out.change.kind == IndexChange::Kind::split);
    CHECK(out.change.parent == cot);
    CHECK(out.change.added == 9);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(out.registry[i].id == base[i].id);
    CHECK_ERRC(apply_patch(out.registry, p), Errc::DuplicateId);
  }
  SUBCASE("merge absorbs the partner") {
    OperatorPatch p{.target_id = "cot", .structure_action = StructureAction::merge, .merge_with = "testing"};
    const auto out = apply_patch(base, p);
    CHECK(out.registry.size() == 8);
    CHECK_FALSE(out.registry.index_of("testing"));
    CHECK(out.registry.at("cot").prompt == base.at("cot").prompt + "\n" + base.at("testing").prompt);
    CHECK(out.change.kind == IndexChange::Kind::merge);
    CHECK(out.change.removed == *base.index_of("testing"));
  }
  SUBCASE("rewire flags the operator") {
    OperatorPatch p{.target_id = "react", .structure_action = StructureAction::rewire};
    CHECK(apply_patch(base, p).registry.at("react").rewire);
  }
  SUBCASE("errors") {
    CHECK_ERRC(apply_patch(base, OperatorPatch{.target_id = "exit", .new_temperature = 0.2}), Errc::PatchOnExitOperator);
    CHECK_ERRC(apply_patch(base, OperatorPatch{.target_id = "nope", .new_temperature = 0.2}), Errc::UnknownTarget);
    CHECK_ERRC(apply_patch(base, OperatorPatch{.target_id = "cot",
                                               .structure_action = StructureAction::merge,
                                               .merge_with = "ghost"}),
               Errc::MergeUnknownPartner);
    CHECK_ERRC(apply_patch(base, OperatorPatch{.target_id = "cot",
                                               .structure_action = StructureAction::merge,
                                               .merge_with = "exit"}),
               Errc::PatchOnExitOperator);
    CHECK_ERRC(apply_patch(base, OperatorPatch{.target_id = "cot"}), Errc::InvalidPatch);
    CHECK_ERRC(apply_patch(base, OperatorPatch{.target_id = "cot", .new_temperature = 3.0}), Errc::InvalidTemperature);
    CHECK_ERRC(apply_patch(base, OperatorPatch{.target_id = "direct_io", .structure_action = StructureAction::split}),
               Errc::InvalidPatch);
  }
}

TEST_CASE("no-op patches leave the serialized registry unchanged") {
  const auto base = builtin_registry();
  auto r = base;
  for (const auto& op : base) {
    if (op.kind == OperatorKind::early_exit) continue;
    r = apply_patch(r, OperatorPatch{.target_id = op.id, .new_prompt = op.prompt, .new_temperature = op.temperature})
            .registry;
  }
  CHECK(registry_to_json(r).dump() == registry_to_json(base).dump());
}

TEST_CASE("random patch sequences keep the registry invariants") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    auto r = builtin_registry();
    for (int step = 0; step < 12; ++step) {
      const auto& target = r[rng.below(r.size())];
      OperatorPatch p{.target_id = target.id};
      switch (rng.below(4)) {
        case 0:
          p.new_temperature = static_cast<double>(rng.below(21)) / 10.0;
          break;
        case 1:
          p.structure_action = StructureAction::split;
          break;
        case 2:
          p.structure_action = StructureAction::merge;
          p.merge_with = r[rng.below(r.size())].id;
          break;
        default:
          p.new_prompt = target.prompt + " v";
      }
      try {
        const auto before = r;
        const auto out = apply_patch(r, p);
        // Surviving operators keep their relative order.
        std::vector<std::string> kept;
        for (const auto& op : before)
          if (out.registry.index_of(op.id)) kept.push_back(op.id);
        for (std::size_t i = 0; i < kept.size(); ++i) CHECK(out.registry[i].id == kept[i]);
        r = out.registry;
      } catch (const Error&) {
      }
      REQUIRE(count_kind(r, OperatorKind::early_exit) == 1);
      REQUIRE(count_kind(r, OperatorKind::direct_io) == 1);
    }
    CHECK(registry_from_json(nlohmann::json::parse(registry_to_json(r).dump())) == r);
  }
}

TEST_CASE("render_prompt") {
  OperatorSpec op = builtin_registry().at("cot");
  op.prompt = "Q: {input}\nA:";
  CHECK(render_prompt(op, "2+2") == "Q: 2+2\nA:");
  op.prompt = "Think.";
  CHECK(render_prompt(op, "2+2") == "Think.\n\n2+2");
}
