// maas: train, evaluate and inspect a query-conditioned workflow controller.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 backend error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "maas/error.hpp"
#include "maas/harness.hpp"
#include "maas/live_env.hpp"
#include "maas/synthetic_env.hpp"

using namespace maas;

namespace {

constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kBackend = 4;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::InvalidConfig:
      return kUsage;
    case Errc::BackendUnavailable:
    case Errc::MalformedResponse:
    case Errc::RemoteUnavailable:
    case Errc::MutatorUnavailable:
      return kBackend;
    default:
      return kData;
  }
}

struct EnvOptions {
  std::string kind = "synthetic";
  std::string profile;
  std::string checker = "exact_match";
};

void add_env_options(CLI::App* cmd, EnvOptions& o) {
  cmd->add_option("--env", o.kind, "Execution backend")->check(CLI::IsMember({"synthetic", "live"}));
  cmd->add_option("--env-profile", o.profile, "Synthetic operator profile JSON (synthetic env)");
  cmd->add_option("--checker", o.checker, "Answer checker")->check(CLI::IsMember({"exact_match", "numeric"}));
}

std::shared_ptr<const Environment> make_env(const EnvOptions& o) {
  const auto checker = checker_from_string(o.checker);
  if (o.kind == "synthetic") {
    if (o.profile.empty()) throw Error(Errc::InvalidConfig, "--env synthetic needs --env-profile");
    return std::make_shared<SyntheticEnvironment>(load_profiles(o.profile), checker);
  }
  auto backend = BackendConfig::from_env();
  if (backend.api_key.empty()) std::cerr << "maas: warning: MAAS_API_KEY is not set\n";
  auto transport = std::make_shared<HttplibTransport>(backend.base_url);
  return std::make_shared<LiveEnvironment>(backend, transport, checker);
}

void write_json(const nlohmann::json& j, const std::optional<std::string>& path) {
  std::cout << j.dump(2) << "\n";
  if (path) {
    std::ofstream out(*path, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + *path);
    out << j.dump(2) << "\n";
  }
}

std::vector<QueryRecord> select_split(std::vector<QueryRecord> records, const std::string& split, std::uint64_t seed) {
  if (split == "all") return records;
  auto [train, test] = split_dataset(std::move(records), seed);
  return split == "train" ? train : test;
}

// Queries used by `inspect` when no probe file is given.
const std::vector<std::string> kDefaultProbes = {
    "What is 7 + 5?",
    "A shop sells pens at 3 dollars each. How much do 4 pens cost?",
    "How many ways can 6 people be seated around a round table?",
    "Find the number of subsets of a 10-element set with an even number of elements.",
    "Write a function that returns the n-th Fibonacci number.",
    "What is the capital of France?",
};

nlohmann::json inspect(const Checkpoint& ck, const std::vector<std::string>& probes) {
  const auto embedder = embedder_for(ck);
  const auto table = embed_operators(ck.registry, *embedder);
  const std::size_t L = ck.config.layers;
  std::vector<std::vector<double>> sums(L, std::vector<double>(ck.registry.size(), 0.0));
  std::vector<std::size_t> reached(L, 0);
  std::map<std::string, std::size_t> exits;
  for (const auto& p : probes) {
    const auto qv = embedder->embed(p).values;
    const auto arch =
        sample_architecture(ck.state, ck.registry, table, qv, {L, ck.config.thres}, SampleMode::eval, nullptr);
    for (std::size_t l = 0; l < arch.scores.size(); ++l) {
      ++reached[l];
      for (std::size_t k = 0; k < ck.registry.size(); ++k) sums[l][k] += arch.scores[l].scores[k];
    }
    ++exits[exit_bucket(arch)];
  }
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < L; ++l) {
    nlohmann::json scores = nlohmann::json::object();
    for (std::size_t k = 0; k < ck.registry.size(); ++k)
      scores[ck.registry[k].id] = reached[l] ? sums[l][k] / static_cast<double>(reached[l]) : 0.0;
    layers.push_back({{"layer", l + 1}, {"probes_reaching", reached[l]}, {"mean_scores", std::move(scores)}});
  }
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& op : ck.registry)
    ops.push_back({{"id", op.id}, {"temperature", op.temperature}, {"agent_count", op.agent_count}});
  nlohmann::json config;
  to_json(config, ck.config);
  return {{"config", config},
          {"steps_done", ck.steps_done},
          {"parameter_version", ck.state.version},
          {"operators", std::move(ops)},
          {"probes", probes.size()},
          {"exit_histogram", exits},
          {"layers", std::move(layers)},
          {"metrics_summary", ck.metrics_summary}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-conditioned agent workflow trainer"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a supernet and write a checkpoint");
  std::string dataset, checkpoint, mutator = "mock", split_train = "train", embedder = "hashing",
                                   embed_model = RemoteEmbeddingConfig{}.model;
  std::optional<std::string> metrics_out, resume;
  std::optional<std::size_t> embed_dim;
  EnvOptions train_env;
  TrainConfig cfg;
  bool serial = false;
  train->add_option("--dataset", dataset, "JSONL dataset")->required();
  add_env_options(train, train_env);
  train->add_option("--layers", cfg.layers, "Maximum depth L");
  train->add_option("--thres", cfg.thres, "Cumulative score threshold");
  train->add_option("--lambda", cfg.lambda, "Cost penalty");
  train->add_option("--samples-k", cfg.samples_k, "Architectures sampled per query");
  train->add_option("--lr", cfg.lr, "Controller learning rate");
  train->add_option("--iterations", cfg.iterations, "Passes over the train split");
  train->add_option("--seed", cfg.seed, "Seed for initialization, split and sampling");
  train->add_option("--patch-every", cfg.patch_every, "Steps between operator patches (0 disables)");
  train->add_option("--hidden", cfg.hidden, "Controller hidden width");
  train->add_option("--mutator", mutator, "Operator mutator")->check(CLI::IsMember({"mock", "llm", "none"}));
  train->add_option("--split", split_train, "Records to train on")->check(CLI::IsMember({"train", "all"}));
  train->add_option("--embedder", embedder, "Embedding provider")->check(CLI::IsMember({"hashing", "remote"}));
  train->add_option("--embed-model", embed_model, "Remote embedding model");
  train->add_option("--embed-dim", embed_dim, "Embedding dimension");
  train->add_option("--resume", resume, "Continue from this checkpoint (its config wins)");
  train->add_option("--checkpoint", checkpoint, "Output checkpoint path")->required();
  train->add_option("--metrics-out", metrics_out, "Per-step JSONL metrics");
  train->add_flag("--serial", serial, "Disable OpenMP parallelism");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with deterministic selection");
  std::string eval_ck, eval_data, split_eval = "all";
  std::optional<std::string> report_out;
  EnvOptions eval_env;
  bool eval_serial = false;
  eval->add_option("--checkpoint", eval_ck, "Checkpoint")->required();
  eval->add_option("--dataset", eval_data, "JSONL dataset")->required();
  add_env_options(eval, eval_env);
  eval->add_option("--split", split_eval, "Records to evaluate (test uses the checkpoint seed)")
      ->check(CLI::IsMember({"all", "test", "train"}));
  eval->add_option("--report-out", report_out, "Also write the report here");
  eval->add_flag("--serial", eval_serial, "Disable OpenMP parallelism");

  // sample
  auto* sample = app.add_subcommand("sample", "Show the architecture chosen for one query");
  std::string sample_ck, query, mode = "eval";
  std::uint64_t sample_seed = 0;
  bool explain = false;
  sample->add_option("--checkpoint", sample_ck, "Checkpoint")->required();
  sample->add_option("--query", query, "Query text")->required();
  sample->add_option("--mode", mode, "eval = deterministic, train = stochastic")
      ->check(CLI::IsMember({"eval", "train"}));
  sample->add_option("--seed", sample_seed, "Sampling seed (train mode)");
  sample->add_flag("--explain", explain, "Include per-layer scores and draw order");

  // inspect
  auto* insp = app.add_subcommand("inspect", "Summarize a checkpoint");
  std::string insp_ck;
  std::optional<std::string> probe_file;
  insp->add_option("--checkpoint", insp_ck, "Checkpoint")->required();
  insp->add_option("--probe", probe_file, "JSONL dataset whose queries form the probe set");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*train) {
      cfg.policy = serial ? ExecPolicy::serial : ExecPolicy::parallel;
      auto records = load_dataset(dataset);
      Checkpoint start;
      if (resume) {
        start = load_checkpoint(*resume);
        start.config.policy = cfg.policy;
      } else {
        if (embed_dim) cfg.embed_dim = *embed_dim;
        if (embedder == "remote" && !embed_dim)
          throw Error(Errc::InvalidConfig, "--embedder remote needs --embed-dim");
        start = initial_checkpoint(cfg);
        if (embedder == "remote")
          start.embedder = {{"provider", "remote"}, {"model", embed_model}, {"dimension", cfg.embed_dim}};
      }
      const auto train_records = select_split(std::move(records), split_train, start.config.seed);
      TrainOptions opts;
      opts.metrics_out = metrics_out;
      if (mutator == "mock") {
        opts.mutator = std::make_shared<MockMutator>();
      } else if (mutator == "llm") {
        auto backend = BackendConfig::from_env();
        opts.mutator = std::make_shared<LlmMutator>(backend, std::make_shared<HttplibTransport>(backend.base_url));
      }
      const auto out = run_train(start, train_records, make_env(train_env), opts);
      save_checkpoint(out, checkpoint);
      std::cout << out.metrics_summary.dump(2) << "\n";
    } else if (*eval) {
      const auto ck = load_checkpoint(eval_ck);
      const auto records = select_split(load_dataset(eval_data), split_eval, ck.config.seed);
      const auto env = make_env(eval_env);
      const auto report =
          run_eval(ck, records, *env, eval_serial ? ExecPolicy::serial : ExecPolicy::parallel);
      write_json(report_to_json(report), report_out);
    } else if (*sample) {
      const auto ck = load_checkpoint(sample_ck);
      const auto arch = sample_for_query(ck, query, mode == "train" ? SampleMode::train : SampleMode::eval, sample_seed);
      std::cout << architecture_to_json(arch, explain).dump(2) << "\n";
    } else if (*insp) {
      const auto ck = load_checkpoint(insp_ck);
      std::vector<std::string> probes = kDefaultProbes;
      if (probe_file) {
        probes.clear();
        for (const auto& r : load_dataset(*probe_file)) probes.push_back(r.query);
      }
      std::cout << inspect(ck, probes).dump(2) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "maas: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "maas: " << e.what() << "\n";
    return kData;
  }
  return 0;
}
