#include "maas/harness.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "maas/error.hpp"

namespace maas {

namespace {

QueryRecord parse_record(const nlohmann::json& j, std::size_t line) {
  auto field = [&](const char* name) -> const nlohmann::json& {
    if (!j.contains(name)) throw Error(Errc::ParseError, std::string("missing field '") + name + "'", line);
    return j[name];
  };
  QueryRecord q;
  try {
    q.id = field("id").get<std::string>();
    q.query = field("query").get<std::string>();
    q.answer = field("answer").get<std::string>();
    q.domain = field("domain").get<std::string>();
    q.difficulty = field("difficulty").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, e.what(), line);
  }
  if (!(q.difficulty >= 0.0 && q.difficulty <= 1.0))
    throw Error(Errc::ParseError, "difficulty must lie in [0, 1]", line);
  return q;
}

}  // namespace

std::vector<QueryRecord> parse_dataset(std::istream& in) {
  std::vector<QueryRecord> out;
  std::set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, e.what(), line);
    }
    if (!j.is_object()) throw Error(Errc::ParseError, "expected a JSON object", line);
    auto q = parse_record(j, line);
    if (!ids.insert(q.id).second) throw Error(Errc::DuplicateQueryId, "query id '" + q.id + "' repeated", line);
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<QueryRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open dataset " + path);
  return parse_dataset(in);
}

void to_json(nlohmann::json& j, const QueryRecord& q) {
  j = {{"id", q.id}, {"query", q.query}, {"answer", q.answer}, {"domain", q.domain}, {"difficulty", q.difficulty}};
}

namespace {

template <typename T>
void seeded_shuffle(std::vector<T>& xs, Rng& rng) {
  for (std::size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[rng.below(i)]);
}

}  // namespace

std::pair<std::vector<QueryRecord>, std::vector<QueryRecord>> split_dataset(std::vector<QueryRecord> records,
                                                                            std::uint64_t seed) {
  if (records.size() < 5)
    throw Error(Errc::TooFewRecords, "need at least 5 records to split, got " + std::to_string(records.size()));
  Rng rng(seed, {stream::kSplit});
  seeded_shuffle(records, rng);
  const std::size_t n_train = (records.size() + 4) / 5;
  std::vector<QueryRecord> test(std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(n_train)),
                                std::make_move_iterator(records.end()));
  records.resize(n_train);
  return {std::move(records), std::move(test)};
}

nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  return {{"format_version", c.format_version},
          {"config", c.config},
          {"registry", registry_to_json(c.registry)},
          {"controllers", state_to_json(c.state)},
          {"embedder", c.embedder},
          {"rng_state", {{"seed", c.config.seed}, {"steps_done", c.steps_done}}},
          {"metrics_summary", c.metrics_summary}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint c;
  try {
    c.format_version = j.at("format_version").get<int>();
    if (c.format_version != Checkpoint::kFormatVersion)
      throw Error(Errc::ParseError, "unsupported checkpoint format_version " + std::to_string(c.format_version));
    c.config = j.at("config").get<TrainConfig>();
    c.registry = registry_from_json(j.at("registry"));
    c.state = state_from_json(j.at("controllers"));
    c.embedder = j.at("embedder");
    c.steps_done = j.at("rng_state").value("steps_done", std::size_t{0});
    c.metrics_summary = j.value("metrics_summary", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("checkpoint: ") + e.what());
  }
  if (c.state.dims.n_ops != c.registry.size())
    throw Error(Errc::ShapeMismatch, "checkpoint controller width differs from registry size");
  return c;
}

std::string serialize_checkpoint(const Checkpoint& c) { return checkpoint_to_json(c).dump(2) + "\n"; }

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write checkpoint " + path);
  out << serialize_checkpoint(c);
  if (!out) throw Error(Errc::IoError, "failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open checkpoint " + path);
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, path + ": " + e.what());
  }
}

Checkpoint initial_checkpoint(const TrainConfig& config, OperatorRegistry registry) {
  config.validate();
  registry.require_complete();
  Checkpoint c;
  c.config = config;
  c.state = init_params(config.seed, {config.embed_dim, config.hidden, config.layers, registry.size()});
  c.registry = std::move(registry);
  c.embedder = HashingEmbedder(config.embed_dim).config();
  return c;
}

std::shared_ptr<const EmbeddingProvider> embedder_for(const Checkpoint& checkpoint) {
  return make_embedder(checkpoint.embedder, BackendConfig::from_env());
}

Checkpoint run_train(const Checkpoint& start, const std::vector<QueryRecord>& train_records,
                     std::shared_ptr<const Environment> env, const TrainOptions& options) {
  SupernetTrainer trainer(start.config, start.registry, start.state, embedder_for(start), std::move(env),
                          options.mutator, start.steps_done);
  std::ofstream metrics;
  if (options.metrics_out) {
    metrics.open(*options.metrics_out, std::ios::trunc);
    if (!metrics) throw Error(Errc::IoError, "cannot write metrics " + *options.metrics_out);
  }

  double last_utility = 0.0;
  double last_cost = 0.0;
  std::size_t patches = 0;
  for (std::size_t pass = 0; pass < start.config.iterations; ++pass) {
    std::vector<std::size_t> order(train_records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(start.config.seed, {stream::kEpoch, pass});
    seeded_shuffle(order, rng);
    last_utility = last_cost = 0.0;
    for (std::size_t i : order) {
      const auto m = trainer.train_step(train_records[i]);
      patches += m.patches_applied;
      last_utility += m.mean_utility;
      last_cost += m.mean_cost;
      if (metrics.is_open()) metrics << nlohmann::json(m).dump() << "\n";
    }
  }

  Checkpoint out = start;
  out.registry = trainer.registry();
  out.state = trainer.state();
  out.steps_done = trainer.steps_done();
  const double n = train_records.empty() ? 1.0 : static_cast<double>(train_records.size());
  out.metrics_summary = {{"steps", trainer.steps_done()},
                         {"patches_applied", patches},
                         {"final_pass_mean_utility", start.config.iterations ? last_utility / n : 0.0},
                         {"final_pass_mean_cost", start.config.iterations ? last_cost / n : 0.0}};
  if (start.config.iterations == 0) out.metrics_summary = start.metrics_summary;
  return out;
}

namespace {

struct EvalOutcome {
  double utility = 0.0;
  double cost = 0.0;
  int llm_calls = 0;
  std::size_t exit_depth = 0;
  std::string bucket;
};

void add_to(EvalBucket& b, const EvalOutcome& o) {
  ++b.count;
  b.accuracy += o.utility;
  b.mean_cost += o.cost;
  b.mean_llm_calls += o.llm_calls;
  b.mean_exit_depth += static_cast<double>(o.exit_depth);
}

void finish(EvalBucket& b) {
  if (b.count == 0) return;
  const double n = static_cast<double>(b.count);
  b.accuracy /= n;
  b.mean_cost /= n;
  b.mean_llm_calls /= n;
  b.mean_exit_depth /= n;
}

nlohmann::json bucket_json(const EvalBucket& b) {
  return {{"count", b.count},
          {"accuracy", b.accuracy},
          {"mean_cost", b.mean_cost},
          {"mean_llm_calls", b.mean_llm_calls},
          {"mean_exit_depth", b.mean_exit_depth}};
}

}  // namespace

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json domains = nlohmann::json::object();
  for (const auto& [d, b] : r.by_domain) domains[d] = bucket_json(b);
  auto j = bucket_json(r.overall);
  j["exit_histogram"] = r.exit_histogram;
  j["by_domain"] = std::move(domains);
  return j;
}

EvalReport run_eval(const Checkpoint& checkpoint, const std::vector<QueryRecord>& records, const Environment& env,
                    ExecPolicy policy) {
  const auto embedder = embedder_for(checkpoint);
  const auto table = embed_operators(checkpoint.registry, *embedder);
  const SamplingParams sp{checkpoint.config.layers, checkpoint.config.thres};
  std::vector<EvalOutcome> outcomes(records.size());
  std::vector<std::exception_ptr> errors(records.size());
  const bool parallel = policy == ExecPolicy::parallel;
  // Once a record fails the report is lost anyway; skip the rest rather than
  // paying retries on every remaining record.
  std::atomic<bool> failed{false};

#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(records.size()); ++i) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      const auto& q = records[i];
      const auto qv = embedder->embed(q.query).values;
      auto arch = sample_architecture(checkpoint.state, checkpoint.registry, table, qv, sp, SampleMode::eval, nullptr);
      Rng rng(checkpoint.config.seed, {stream::kEval, static_cast<std::uint64_t>(i)});
      const auto t = execute(arch, checkpoint.registry, q, env, rng);
      outcomes[i] = {t.utility, t.cost, t.llm_calls, arch.exit_depth(sp.max_layers), exit_bucket(arch)};
    } catch (...) {
      errors[i] = std::current_exception();
      failed = true;
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  EvalReport r;
  for (std::size_t i = 0; i < records.size(); ++i) {
    add_to(r.overall, outcomes[i]);
    add_to(r.by_domain[records[i].domain], outcomes[i]);
    ++r.exit_histogram[outcomes[i].bucket];
  }
  finish(r.overall);
  for (auto& [d, b] : r.by_domain) finish(b);
  return r;
}

Architecture sample_for_query(const Checkpoint& checkpoint, const std::string& query, SampleMode mode,
                              std::uint64_t seed) {
  const auto embedder = embedder_for(checkpoint);
  const auto table = embed_operators(checkpoint.registry, *embedder);
  const auto qv = embedder->embed(query).values;
  Rng rng(seed);
  return sample_architecture(checkpoint.state, checkpoint.registry, table, qv,
                             {checkpoint.config.layers, checkpoint.config.thres}, mode, &rng);
}

}  // namespace maas
