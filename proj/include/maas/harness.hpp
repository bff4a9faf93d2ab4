#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "maas/controller.hpp"
#include "maas/embedding.hpp"
#include "maas/executor.hpp"
#include "maas/operator_registry.hpp"
#include "maas/optimizer.hpp"

namespace maas {

// JSONL, one {id, query, answer, domain, difficulty} object per line. Blank
// lines are skipped. Throws ParseError(line) or DuplicateQueryId.
std::vector<QueryRecord> load_dataset(const std::string& path);
std::vector<QueryRecord> parse_dataset(std::istream& in);

void to_json(nlohmann::json& j, const QueryRecord& q);

// Seeded shuffle; the first ceil(n/5) records train, the rest test (1:4).
std::pair<std::vector<QueryRecord>, std::vector<QueryRecord>> split_dataset(std::vector<QueryRecord> records,
                                                                            std::uint64_t seed);

struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  TrainConfig config;
  OperatorRegistry registry;
  SupernetState state;
  nlohmann::json embedder = {{"provider", "hashing"}, {"dimension", 64}};
  std::size_t steps_done = 0;  // with config.seed, fully determines the RNG streams
  nlohmann::json metrics_summary = nlohmann::json::object();
};

nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
std::string serialize_checkpoint(const Checkpoint& c);
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Freshly initialized supernet for a config (builtin operator catalog).
Checkpoint initial_checkpoint(const TrainConfig& config, OperatorRegistry registry = builtin_registry());

struct TrainOptions {
  std::shared_ptr<Mutator> mutator;          // null disables textual patches
  std::optional<std::string> metrics_out;    // JSONL, truncated first
};

// Iterates train steps over the shuffled train split for config.iterations
// passes, starting from `start`.
Checkpoint run_train(const Checkpoint& start, const std::vector<QueryRecord>& train_records,
                     std::shared_ptr<const Environment> env, const TrainOptions& options);

struct EvalBucket {
  std::size_t count = 0;
  double accuracy = 0.0;
  double mean_cost = 0.0;
  double mean_llm_calls = 0.0;
  double mean_exit_depth = 0.0;  // exit layer, L + 1 when no exit
};

struct EvalReport {
  EvalBucket overall;
  std::map<std::string, std::size_t> exit_histogram;
  std::map<std::string, EvalBucket> by_domain;
};

nlohmann::json report_to_json(const EvalReport& r);

// Deterministic selection on every record; no change to the checkpoint.
EvalReport run_eval(const Checkpoint& checkpoint, const std::vector<QueryRecord>& records, const Environment& env,
                    ExecPolicy policy = ExecPolicy::parallel);

// Deterministic architecture for one query under a checkpoint.
Architecture sample_for_query(const Checkpoint& checkpoint, const std::string& query, SampleMode mode,
                              std::uint64_t seed = 0);

std::shared_ptr<const EmbeddingProvider> embedder_for(const Checkpoint& checkpoint);

}  // namespace maas
