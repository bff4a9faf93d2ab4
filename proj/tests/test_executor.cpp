#include <atomic>
#include <map>

#include "doctest.h"
#include "maas/executor.hpp"
#include "maas/live_env.hpp"
#include "maas/synthetic_env.hpp"
#include "test_helpers.hpp"

using namespace maas;

namespace {

SyntheticOperatorProfile prof(const std::string& id, double base, double slope, double cost, double bonus = 0.0) {
  return {.operator_id = id, .base_success = base, .difficulty_slope = slope, .unit_cost = cost, .combine_bonus = bonus};
}

Architecture arch_of(std::vector<std::vector<std::string>> layers, const OperatorRegistry& r) {
  Architecture a;
  a.layers = std::move(layers);
  a.edges = build_dag(a, r);
  return a;
}

const QueryRecord kQuery{"q1", "What is 2+2?", "4", "easy", 0.0};

struct ScriptedTransport : HttpTransport {
  std::vector<HttpResponse> replies;
  std::atomic<std::size_t> calls{0};
  std::vector<std::string> bodies;
  HttpHeaders last_headers;
  HttpResponse post(const std::string&, const std::string& body, const HttpHeaders& headers) override {
    bodies.push_back(body);
    last_headers = headers;
    const std::size_t i = calls++;
    return replies[std::min(i, replies.size() - 1)];
  }
};

BackendConfig test_backend() {
  BackendConfig b;
  b.api_key = "test-key";
  b.retry.sleep = [](std::chrono::milliseconds) {};
  return b;
}

std::string chat_body(const std::string& content, long p = 120, long c = 80) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
                        {"usage", {{"prompt_tokens", p}, {"completion_tokens", c}}}}
      .dump();
}

}  // namespace

TEST_CASE("success probability arithmetic") {
  const auto op = builtin_registry().at("cot");
  QueryRecord q = kQuery;
  q.difficulty = 0.9;
  CHECK(success_probability(prof("cot", 0.9, 0.5, 1), op, q, {}) == doctest::Approx(0.45));
  q.difficulty = 1.0;
  CHECK(success_probability(prof("cot", 0.9, 0.5, 1), op, q, {}) == doctest::Approx(0.4));
  q.difficulty = 0.0;
  CHECK(success_probability(prof("cot", 0.7, 0.5, 1), op, q, {}) == 0.7);
  const std::vector<std::string> preds{"WRONG:x", "4"};
  CHECK(success_probability(prof("cot", 0.5, 0.0, 1, 0.5), op, q, preds) == 1.0);
  q.difficulty = 1.0;
  CHECK(success_probability(prof("cot", 0.2, 0.9, 1), op, q, {}) == 0.0);
  CHECK(success_probability(prof("cot", 0.5, -0.9, 1), op, q, {}) == 1.0);
}

TEST_CASE("prompt marker gates a profile") {
  auto p = prof("cot", 0.9, 0.0, 1);
  p.prompt_marker = "CHECK";
  p.unmarked_base_success = 0.1;
  auto op = builtin_registry().at("cot");
  const std::vector<std::string> preds{"4"};
  CHECK(success_probability(p, op, kQuery, preds) == 0.1);
  op.prompt += " CHECK";
  CHECK(success_probability(p, op, kQuery, {}) == 0.9);
}

TEST_CASE("synthetic_evaluate output and frequency") {
  const auto op = builtin_registry().at("cot");
  Rng rng(1);
  int hits = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto [out, cost] = synthetic_evaluate(prof("cot", 0.3, 0.0, 2.5), op, kQuery, {}, rng);
    CHECK(cost == 2.5);
    if (out == "4") {
      ++hits;
    } else {
      CHECK(out == "WRONG:cot");
    }
  }
  CHECK(std::abs(hits / 20000.0 - 0.3) < 0.015);
}

TEST_CASE("profile validation and lookup") {
  SyntheticOperatorProfile p;
  nlohmann::json j = {{"operator_id", "x"}, {"base_success", 0.5}, {"difficulty_slope", 0.1}, {"unit_cost", 0},
                      {"combine_bonus", 0.0}};
  CHECK_ERRC(j.get_to(p), Errc::InvalidConfig);
  j["unit_cost"] = 1.0;
  j["base_success"] = 1.5;
  CHECK_ERRC(j.get_to(p), Errc::InvalidConfig);
  const SyntheticEnvironment env({prof("cot", 1, 0, 1), prof("direct_io", 1, 0, 1)});
  CHECK(env.profile_for("cot-b").operator_id == "cot");
  CHECK(env.profile_for("cot-b-b").operator_id == "cot");
  CHECK_ERRC(env.profile_for("react"), Errc::UnknownOperatorProfile);
  const auto loaded = load_profiles(data_path("synthetic_profile.json"));
  CHECK(loaded.size() == 8);
}

TEST_CASE("execute on synthetic backends") {
  const auto r = builtin_registry();
  SUBCASE("direct_io alone") {
    const SyntheticEnvironment env({prof("direct_io", 1.0, 0.0, 1.0)});
    Rng rng(1);
    const auto t = execute(arch_of({{"direct_io"}}, r), r, kQuery, env, rng);
    CHECK(t.utility == 1.0);
    CHECK(t.cost == 1.0);
    CHECK(t.llm_calls == 1);
    CHECK(t.final_answer == "4");
  }
  SUBCASE("costs add over nodes") {
    const SyntheticEnvironment env({prof("cot", 0, 0, 2), prof("debate", 0, 0, 3), prof("self_refine", 0, 0, 4)});
    Rng rng(2);
    const auto t = execute(arch_of({{"cot", "debate"}, {"self_refine"}}, r), r, kQuery, env, rng);
    CHECK(t.cost == 9.0);
    CHECK(t.utility == 0.0);
    CHECK(t.llm_calls == 1 + 3 + 6);
    CHECK(t.execution_order == std::vector<std::string>{"1:cot", "1:debate", "2:self_refine"});
    CHECK(t.node_utilities.at("1:cot") == 0.0);
    CHECK(t.final_answer == "WRONG:self_refine");
  }
  SUBCASE("execution order respects every edge") {
    const SyntheticEnvironment env({prof("cot", 0.5, 0, 1), prof("debate", 0.5, 0, 1), prof("react", 0.5, 0, 1),
                                    prof("ensemble", 0.5, 0, 1)});
    const auto a = arch_of({{"cot", "react"}, {"debate"}, {"ensemble", "cot"}}, r);
    Rng rng(3);
    const auto t = execute(a, r, kQuery, env, rng);
    std::map<std::string, std::size_t> seq;
    for (std::size_t i = 0; i < t.execution_order.size(); ++i) seq[t.execution_order[i]] = i;
    for (const auto& e : a.edges)
      if (e.from != "source" && e.to != "sink") CHECK(seq.at(e.from) < seq.at(e.to));
  }
  SUBCASE("seeded runs repeat") {
    const SyntheticEnvironment env({prof("cot", 0.5, 0, 1), prof("debate", 0.5, 0, 1)});
    const auto a = arch_of({{"cot", "debate"}, {"cot"}}, r);
    Rng r1(4), r2(4);
    const auto t1 = execute(a, r, kQuery, env, r1);
    const auto t2 = execute(a, r, kQuery, env, r2);
    CHECK(t1.node_outputs == t2.node_outputs);
    CHECK(t1.utility == t2.utility);
  }
  SUBCASE("failing profiles give zero utility") {
    std::vector<SyntheticOperatorProfile> ps;
    for (const auto& op : r)
      if (op.kind != OperatorKind::early_exit) ps.push_back(prof(op.id, 0.0, 0.0, 1.0, 0.0));
    const SyntheticEnvironment env(ps);
    Rng rng(6);
    for (const auto& layers : std::vector<std::vector<std::vector<std::string>>>{
             {{"direct_io"}}, {{"cot", "react"}, {"debate"}}, {{"ensemble"}, {"testing", "self_refine"}, {"cot"}}})
      CHECK(execute(arch_of(layers, r), r, kQuery, env, rng).utility == 0.0);
  }
  SUBCASE("empty architecture") {
    const SyntheticEnvironment env({prof("cot", 0.5, 0, 1)});
    Rng rng(5);
    CHECK_ERRC(execute(Architecture{}, r, kQuery, env, rng), Errc::EmptyArchitecture);
  }
}

TEST_CASE("majority aggregation") {
  const std::vector<std::string> same{"42", " 42 ", "42"};
  const std::vector<std::size_t> idx{3, 1, 2};
  CHECK(aggregate_majority(same, idx) == " 42 ");
  const std::vector<std::string> tie{"a", "b"};
  const std::vector<std::size_t> tie_idx{5, 2};
  CHECK(aggregate_majority(tie, tie_idx) == "b");
  const std::vector<std::string> two{"x", "y", "y"};
  const std::vector<std::size_t> two_idx{0, 4, 6};
  CHECK(aggregate_majority(two, two_idx) == "y");
}

TEST_CASE("evaluate_answer") {
  CHECK(evaluate_answer("4", "4", Checker::exact_match) == 1.0);
  CHECK(evaluate_answer("4 ", "4", Checker::exact_match) == 0.0);
  CHECK(evaluate_answer(" +4.50 ", "4.5", Checker::numeric) == 1.0);
  CHECK(evaluate_answer("4.0000001", "4", Checker::numeric) == 1.0);
  CHECK(evaluate_answer("4.01", "4", Checker::numeric) == 0.0);
  CHECK(evaluate_answer("3.140000", "3.14", Checker::numeric) == 1.0);
  CHECK(evaluate_answer("abc", "3.14", Checker::numeric) == 0.0);
  CHECK(evaluate_answer("42", "42", Checker::exact_match) == 1.0);
  CHECK(evaluate_answer("four", "4", Checker::numeric) == 0.0);
  CHECK(evaluate_answer("1 000", "1000", Checker::numeric) == 1.0);
  CHECK(checker_from_string("numeric") == Checker::numeric);
  CHECK_ERRC(checker_from_string("fuzzy"), Errc::InvalidConfig);
}

TEST_CASE("retry policy") {
  auto t = std::make_shared<ScriptedTransport>();
  t->replies = {{503, "", ""}, {0, "", "reset"}, {200, "ok", ""}};
  std::vector<long> delays;
  RetryPolicy policy{3, std::chrono::milliseconds(100), [&](auto d) { delays.push_back(d.count()); }};
  int used = 0;
  CHECK(post_with_retry(*t, "/x", "{}", {}, policy, &used) == "ok");
  CHECK(used == 3);
  CHECK(delays == std::vector<long>{100, 200});

  auto bad = std::make_shared<ScriptedTransport>();
  bad->replies = {{400, "nope", ""}};
  CHECK_ERRC(post_with_retry(*bad, "/x", "{}", {}, policy), Errc::BackendUnavailable);
  CHECK(bad->calls == 1);

  auto down = std::make_shared<ScriptedTransport>();
  down->replies = {{429, "", ""}};
  CHECK_ERRC(post_with_retry(*down, "/x", "{}", {}, policy), Errc::BackendUnavailable);
  CHECK(down->calls == 3);
}

TEST_CASE("live call against a canned server") {
  const auto op = builtin_registry().at("react");
  auto t = std::make_shared<ScriptedTransport>();
  t->replies = {{500, "", ""}, {502, "", ""}, {200, chat_body("Reasoning...\nAnswer: 4"), ""}};
  const auto r = live_call(op, "What is 2+2?", test_backend(), *t);
  CHECK(t->calls == 3);
  CHECK(r.content == "Reasoning...\nAnswer: 4");
  CHECK(r.total_tokens() == 200);
  CHECK(t->last_headers.at("Authorization") == "Bearer test-key");
  const auto req = nlohmann::json::parse(t->bodies.back());
  CHECK(req["model"] == "gpt-4o-mini");
  CHECK(req["temperature"] == 1.0);
  CHECK(req["messages"].size() == 2);
  CHECK(req["messages"][0]["role"] == "system");

  auto junk = std::make_shared<ScriptedTransport>();
  junk->replies = {{200, R"({"choices": []})", ""}};
  CHECK_ERRC(live_call(op, "x", test_backend(), *junk), Errc::MalformedResponse);
  auto dead = std::make_shared<ScriptedTransport>();
  dead->replies = {{0, "", "refused"}};
  CHECK_ERRC(live_call(op, "x", test_backend(), *dead), Errc::BackendUnavailable);
}

TEST_CASE("extract_answer") {
  CHECK(extract_answer("blah\nAnswer: 12\nmore") == "12");
  CHECK(extract_answer("Answer: 1\nAnswer:  7 ") == "7");
  CHECK(extract_answer("line one\n  final line  \n\n") == "final line");
  CHECK(extract_answer("") == "");
}

TEST_CASE("live environment runs agent_count calls and votes") {
  auto t = std::make_shared<ScriptedTransport>();
  t->replies = {{200, chat_body("Answer: 5", 10, 5), ""}, {200, chat_body("x\nAnswer: 4", 10, 5), ""},
                {200, chat_body("Answer: 4", 10, 5), ""}};
  const LiveEnvironment env(test_backend(), t, Checker::numeric);
  Rng rng(1);
  const auto res = env.run_node(builtin_registry().at("debate"), kQuery, {}, rng);
  CHECK(res.llm_calls == 3);
  CHECK(res.cost == 45.0);
  CHECK(res.output == "x\nAnswer: 4");
  CHECK(env.evaluate(res.output, kQuery) == 1.0);

  auto no_usage = std::make_shared<ScriptedTransport>();
  no_usage->replies = {{200, R"({"choices":[{"message":{"content":"Answer: 4"}}]})", ""}};
  const LiveEnvironment env2(test_backend(), no_usage);
  CHECK(env2.run_node(builtin_registry().at("cot"), kQuery, {}, rng).cost > 0.0);
}
