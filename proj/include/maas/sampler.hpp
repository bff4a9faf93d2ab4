#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "maas/controller.hpp"
#include "maas/embedding.hpp"
#include "maas/operator_registry.hpp"

namespace maas {

enum class SampleMode { train, eval };

// Node instances are named "<layer>:<operator id>"; the virtual endpoints are
// "source" and "sink".
struct Edge {
  std::string from;
  std::string to;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

inline constexpr const char* kSourceNode = "source";
inline constexpr const char* kSinkNode = "sink";
std::string node_name(std::size_t layer, const std::string& op_id);

// One sampled multi-agent system.
struct Architecture {
  std::vector<std::vector<std::string>> layers;  // operator ids per executed layer
  std::optional<std::size_t> exit_layer;
  std::vector<Edge> edges;
  double log_prob = 0.0;

  // Sampling record: raw draws per visited layer (including the exiting one),
  // the controller inputs/outputs that produced them, and the parameter
  // version they were drawn under.
  std::vector<std::vector<std::size_t>> selections;
  std::vector<std::vector<double>> features;
  std::vector<ScoreVector> scores;
  std::uint64_t params_version = 0;
  SampleMode mode = SampleMode::train;

  // Exit layer if early exit fired, else L + 1.
  std::size_t exit_depth(std::size_t max_layers) const { return exit_layer.value_or(max_layers + 1); }
};

// Profile embeddings per registry index; the early-exit operator maps to zeros.
using OperatorEmbeddingTable = std::vector<std::vector<double>>;
OperatorEmbeddingTable embed_operators(const OperatorRegistry& registry, const EmbeddingProvider& embedder);

struct SamplingParams {
  std::size_t max_layers = 4;  // L
  double thres = 0.3;
};

Architecture sample_architecture(const SupernetState& state, const OperatorRegistry& registry,
                                 const OperatorEmbeddingTable& op_embeddings, std::span<const double> query_vec,
                                 const SamplingParams& params, SampleMode mode, Rng* rng,
                                 ExecPolicy policy = ExecPolicy::serial);

// Recomputes sum over layers of selection log-probs from the stored draws.
// Throws Error(StaleArchitecture) if parameters changed since sampling.
double architecture_log_prob(const SupernetState& state, const OperatorRegistry& registry,
                             const OperatorEmbeddingTable& op_embeddings, std::span<const double> query_vec,
                             const Architecture& arch);

// d log p(arch) / d phi; one entry per controller layer, empty for layers the
// architecture never reached.
using ArchitectureGradient = std::vector<std::optional<LayerGradient>>;
ArchitectureGradient grad_architecture_log_prob(const SupernetState& state, const Architecture& arch,
                                                ExecPolicy policy = ExecPolicy::serial);

std::vector<Edge> build_dag(const Architecture& arch, const OperatorRegistry& registry);

// Kahn's algorithm; returns node names in topological order or nullopt on a cycle.
std::optional<std::vector<std::string>> topological_order(std::span<const Edge> edges);

nlohmann::json architecture_to_json(const Architecture& arch, bool explain);

}  // namespace maas
