#include "maas/sampler.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>

#include "maas/error.hpp"

namespace maas {

std::string node_name(std::size_t layer, const std::string& op_id) { return std::to_string(layer) + ":" + op_id; }

OperatorEmbeddingTable embed_operators(const OperatorRegistry& registry, const EmbeddingProvider& embedder) {
  OperatorEmbeddingTable table;
  table.reserve(registry.size());
  for (const auto& op : registry) {
    if (op.kind == OperatorKind::early_exit) {
      table.emplace_back(embedder.dimension(), 0.0);
    } else {
      table.push_back(embedder.embed(op.profile_text).values);
    }
  }
  return table;
}

namespace {

std::vector<double> layer_sum(const OperatorEmbeddingTable& table, std::span<const std::size_t> members, std::size_t d) {
  std::vector<double> sum(d, 0.0);
  for (std::size_t i : members) {
    const auto& e = table.at(i);
    if (e.size() != d) throw Error(Errc::DimensionMismatch, "operator embedding dimension differs from query");
    for (std::size_t k = 0; k < d; ++k) sum[k] += e[k];
  }
  return sum;
}

void check_inputs(const SupernetState& state, const OperatorRegistry& registry, const OperatorEmbeddingTable& table,
                  std::span<const double> query_vec, std::size_t max_layers) {
  if (registry.size() != state.dims.n_ops || table.size() != registry.size())
    throw Error(Errc::DimensionMismatch, "registry, embedding table and controller disagree on operator count");
  if (query_vec.size() != state.dims.embed_dim)
    throw Error(Errc::DimensionMismatch, "query embedding dimension differs from controller input");
  if (max_layers < 1 || max_layers > state.layers.size())
    throw Error(Errc::InvalidConfig, "max_layers must be in 1..controller depth");
}

}  // namespace

Architecture sample_architecture(const SupernetState& state, const OperatorRegistry& registry,
                                 const OperatorEmbeddingTable& op_embeddings, std::span<const double> query_vec,
                                 const SamplingParams& params, SampleMode mode, Rng* rng, ExecPolicy policy) {
  registry.require_complete();
  check_inputs(state, registry, op_embeddings, query_vec, params.max_layers);
  if (mode == SampleMode::train && rng == nullptr) throw Error(Errc::InvalidConfig, "train-mode sampling needs an rng");
  const std::size_t exit_idx = registry.exit_index();
  const std::size_t d = state.dims.embed_dim;

  Architecture arch;
  arch.mode = mode;
  arch.params_version = state.version;
  std::vector<std::vector<double>> sums;
  for (std::size_t l = 1; l <= params.max_layers; ++l) {
    auto feature = layer_feature(query_vec, sums);
    ScoreVector scores = score_layer(state, l, feature, policy);
    Selection sel;
    if (mode == SampleMode::train) {
      sel = sample_selection(scores, params.thres, *rng);
    } else {
      sel.indices = select_deterministic(scores, params.thres);
      sel.log_prob = selection_log_prob(scores, sel.indices);
    }
    arch.log_prob += sel.log_prob;
    arch.selections.push_back(sel.indices);
    arch.features.push_back(std::move(feature));
    arch.scores.push_back(std::move(scores));

    if (std::find(sel.indices.begin(), sel.indices.end(), exit_idx) != sel.indices.end()) {
      arch.exit_layer = l;
      break;
    }
    std::vector<std::string> ids;
    for (std::size_t i : sel.indices) ids.push_back(registry[i].id);
    arch.layers.push_back(std::move(ids));
    sums.push_back(layer_sum(op_embeddings, sel.indices, d));
  }
  if (arch.exit_layer == 1u) arch.layers = {{registry[registry.direct_io_index()].id}};
  arch.edges = build_dag(arch, registry);
  return arch;
}

double architecture_log_prob(const SupernetState& state, const OperatorRegistry& registry,
                             const OperatorEmbeddingTable& op_embeddings, std::span<const double> query_vec,
                             const Architecture& arch) {
  if (arch.params_version != state.version)
    throw Error(Errc::StaleArchitecture, "architecture sampled under parameter version " +
                                             std::to_string(arch.params_version) + ", current is " +
                                             std::to_string(state.version));
  check_inputs(state, registry, op_embeddings, query_vec, std::max<std::size_t>(arch.selections.size(), 1));
  const std::size_t d = state.dims.embed_dim;
  std::vector<std::vector<double>> sums;
  double lp = 0.0;
  for (std::size_t l = 1; l <= arch.selections.size(); ++l) {
    const auto& sel = arch.selections[l - 1];
    const auto feature = layer_feature(query_vec, sums);
    lp += selection_log_prob(score_layer(state, l, feature), sel);
    sums.push_back(layer_sum(op_embeddings, sel, d));
  }
  return lp;
}

ArchitectureGradient grad_architecture_log_prob(const SupernetState& state, const Architecture& arch, ExecPolicy policy) {
  if (arch.params_version != state.version)
    throw Error(Errc::StaleArchitecture, "architecture gradient requested after a parameter update");
  ArchitectureGradient g(state.layers.size());
  for (std::size_t l = 1; l <= arch.selections.size(); ++l)
    g[l - 1] = grad_log_prob(state, l, arch.features[l - 1], arch.selections[l - 1], policy);
  return g;
}

std::vector<Edge> build_dag(const Architecture& arch, const OperatorRegistry& registry) {
  std::vector<Edge> edges;
  const auto& layers = arch.layers;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (const auto& id : layers[l]) {
      const std::string me = node_name(l + 1, id);
      if (l == 0) {
        edges.push_back({kSourceNode, me});
      } else {
        for (const auto& prev : layers[l - 1]) edges.push_back({node_name(l, prev), me});
        const auto idx = registry.index_of(id);
        if (idx && registry[*idx].rewire) edges.push_back({kSourceNode, me});
      }
    }
  }
  if (!layers.empty())
    for (const auto& id : layers.back()) edges.push_back({node_name(layers.size(), id), kSinkNode});
  return edges;
}

std::optional<std::vector<std::string>> topological_order(std::span<const Edge> edges) {
  std::map<std::string, std::size_t> indegree;
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& e : edges) {
    indegree.try_emplace(e.from, 0);
    ++indegree[e.to];
    out[e.from].push_back(e.to);
  }
  std::queue<std::string> ready;
  for (const auto& [n, deg] : indegree)
    if (deg == 0) ready.push(n);
  std::vector<std::string> order;
  while (!ready.empty()) {
    auto n = ready.front();
    ready.pop();
    order.push_back(n);
    for (const auto& m : out[n])
      if (--indegree[m] == 0) ready.push(m);
  }
  if (order.size() != indegree.size()) return std::nullopt;
  return order;
}

nlohmann::json architecture_to_json(const Architecture& arch, bool explain) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : arch.edges) edges.push_back({e.from, e.to});
  nlohmann::json j = {{"layers", arch.layers},
                      {"exit_layer", arch.exit_layer ? nlohmann::json(*arch.exit_layer) : nlohmann::json(nullptr)},
                      {"edges", std::move(edges)},
                      {"log_prob", arch.log_prob}};
  if (explain) {
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& s : arch.scores) scores.push_back(s.scores);
    j["layer_scores"] = std::move(scores);
    j["selections"] = arch.selections;
    j["mode"] = arch.mode == SampleMode::train ? "train" : "eval";
  }
  return j;
}

}  // namespace maas
