#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "maas/controller.hpp"
#include "maas/embedding.hpp"
#include "maas/executor.hpp"
#include "maas/http_transport.hpp"
#include "maas/operator_registry.hpp"
#include "maas/sampler.hpp"

namespace maas {

struct TrainConfig {
  std::size_t layers = 4;  // L
  double thres = 0.3;
  double lambda = 5e-3;
  std::size_t samples_k = 4;  // K
  double lr = 0.05;
  std::size_t iterations = 200;  // passes over the train split
  std::uint64_t seed = 0;
  std::size_t patch_every = 10;  // 0 disables textual patches
  std::size_t embed_dim = 64;
  std::size_t hidden = 64;
  ExecPolicy policy = ExecPolicy::parallel;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// m_k = u_k / sum(u) - lambda * c_k / sum(c). When sum(u) == 0 the utility
// term is 1/K for every sample.
std::vector<double> importance_weights(std::span<const double> utilities, std::span<const double> costs, double lambda);

// phi += (lr / K) * sum_k m_k * grad log p(G_k); bumps the parameter version.
SupernetState update_distribution(SupernetState state, std::span<const ArchitectureGradient> grads,
                                  std::span<const double> weights, double lr, ExecPolicy policy = ExecPolicy::serial);

// Produces operator patches from a window of execution traces.
class Mutator {
 public:
  virtual ~Mutator() = default;
  virtual std::vector<OperatorPatch> propose(const OperatorRegistry& registry, std::span<const ExecutionTrace> traces) = 0;
};

// Deterministic: targets the executed operator with the lowest node success
// rate (ties to the lowest index), appends a verification sentence to its
// prompt and moves its temperature 0.1 toward 0.5. Emits nothing when both
// edits are already in place.
class MockMutator final : public Mutator {
 public:
  static constexpr const char* kSentence = "\nDouble-check each intermediate step before answering.";
  std::vector<OperatorPatch> propose(const OperatorRegistry& registry, std::span<const ExecutionTrace> traces) override;
};

struct OperatorStats {
  std::size_t runs = 0;
  std::size_t successes = 0;
  double rate() const noexcept { return runs ? static_cast<double>(successes) / static_cast<double>(runs) : 1.0; }
};
// Node-level success counts per registry index over the given traces.
std::vector<OperatorStats> operator_stats(const OperatorRegistry& registry, std::span<const ExecutionTrace> traces);

// Asks a chat model for one operator revision. The reply must be a JSON object
// {thought, description, code} whose `code` is a patch object (or a string
// holding one); generated code is never executed.
class LlmMutator final : public Mutator {
 public:
  LlmMutator(BackendConfig backend, std::shared_ptr<HttpTransport> transport, std::string model = "gpt-4o-mini",
             std::string task_description = "");
  std::vector<OperatorPatch> propose(const OperatorRegistry& registry, std::span<const ExecutionTrace> traces) override;

  std::string render_prompt(const OperatorRegistry& registry, std::span<const ExecutionTrace> traces) const;

 private:
  BackendConfig backend_;
  std::shared_ptr<HttpTransport> transport_;
  std::string model_;
  std::string task_;
};

// Parse an LLM mutator reply; throws Error(UnparseableMutation).
OperatorPatch parse_mutation_reply(std::string_view content);

std::vector<OperatorPatch> textual_gradient(const OperatorRegistry& registry, std::span<const ExecutionTrace> traces,
                                            Mutator& mutator);

struct StepMetrics {
  std::size_t step = 0;
  std::string query_id;
  double mean_utility = 0.0;
  double mean_cost = 0.0;
  std::map<std::string, std::size_t> exit_histogram;  // "1".."L", "none"
  std::size_t patches_applied = 0;
};

void to_json(nlohmann::json& j, const StepMetrics& m);

std::string exit_bucket(const Architecture& arch);

// Owns the supernet (controller + operators) during training and runs the
// per-query joint update: K sampled architectures, cost-aware distribution
// step, and periodic textual patches over the accumulated trace window.
class SupernetTrainer {
 public:
  SupernetTrainer(TrainConfig config, OperatorRegistry registry, std::shared_ptr<const EmbeddingProvider> embedder,
                  std::shared_ptr<const Environment> env, std::shared_ptr<Mutator> mutator);
  // Resume from existing parameters.
  SupernetTrainer(TrainConfig config, OperatorRegistry registry, SupernetState state,
                  std::shared_ptr<const EmbeddingProvider> embedder, std::shared_ptr<const Environment> env,
                  std::shared_ptr<Mutator> mutator, std::size_t steps_done = 0);

  StepMetrics train_step(const QueryRecord& query);

  const SupernetState& state() const noexcept { return state_; }
  const OperatorRegistry& registry() const noexcept { return registry_; }
  const OperatorEmbeddingTable& op_embeddings() const noexcept { return op_embeddings_; }
  const TrainConfig& config() const noexcept { return config_; }
  std::size_t steps_done() const noexcept { return step_; }
  // Traces of the most recent step, in sample order.
  const std::vector<ExecutionTrace>& last_traces() const noexcept { return last_traces_; }

 private:
  std::size_t apply_patches();

  TrainConfig config_;
  OperatorRegistry registry_;
  SupernetState state_;
  std::shared_ptr<const EmbeddingProvider> embedder_;
  std::shared_ptr<const Environment> env_;
  std::shared_ptr<Mutator> mutator_;
  OperatorEmbeddingTable op_embeddings_;
  std::vector<ExecutionTrace> window_;
  std::vector<ExecutionTrace> last_traces_;
  std::size_t step_ = 0;
};

// RNG stream tags; a stream is (seed, tag, counters...).
namespace stream {
inline constexpr std::uint64_t kSample = 1;
inline constexpr std::uint64_t kRemap = 2;
inline constexpr std::uint64_t kEpoch = 3;
inline constexpr std::uint64_t kEval = 4;
inline constexpr std::uint64_t kSplit = 5;
}  // namespace stream

}  // namespace maas
