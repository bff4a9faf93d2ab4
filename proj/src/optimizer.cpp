#include "maas/optimizer.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <iostream>
#include <numeric>
#include <sstream>

#include "maas/error.hpp"
#include "maas/live_env.hpp"

namespace maas {

void TrainConfig::validate() const {
  if (layers < 1) throw Error(Errc::InvalidConfig, "layers must be >= 1");
  if (!(thres > 0.0 && thres < 1.0)) throw Error(Errc::InvalidConfig, "thres must lie in (0, 1)");
  if (!(lambda >= 0.0)) throw Error(Errc::InvalidConfig, "lambda must be >= 0");
  if (samples_k < 2) throw Error(Errc::InvalidConfig, "samples_k must be >= 2");
  if (!(lr > 0.0)) throw Error(Errc::InvalidConfig, "lr must be > 0");
  if (embed_dim == 0 || hidden == 0) throw Error(Errc::InvalidConfig, "embed_dim and hidden must be positive");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"layers", c.layers},       {"thres", c.thres},
       {"lambda", c.lambda},       {"samples_k", c.samples_k},
       {"lr", c.lr},               {"iterations", c.iterations},
       {"seed", c.seed},           {"patch_every", c.patch_every},
       {"embed_dim", c.embed_dim}, {"hidden", c.hidden}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.layers = j.at("layers").get<std::size_t>();
  c.thres = j.at("thres").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.samples_k = j.at("samples_k").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.iterations = j.at("iterations").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.patch_every = j.value("patch_every", std::size_t{10});
  c.embed_dim = j.value("embed_dim", std::size_t{64});
  c.hidden = j.value("hidden", std::size_t{64});
}

std::vector<double> importance_weights(std::span<const double> utilities, std::span<const double> costs, double lambda) {
  if (utilities.size() != costs.size() || utilities.empty())
    throw Error(Errc::ShapeMismatch, "utilities and costs must be non-empty and equally long");
  double sum_u = 0.0;
  double sum_c = 0.0;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    if (!(costs[k] > 0.0)) throw Error(Errc::NonpositiveCost, "sample " + std::to_string(k) + " has cost <= 0");
    if (utilities[k] < 0.0) throw Error(Errc::InvalidConfig, "utilities must be >= 0");
    sum_u += utilities[k];
    sum_c += costs[k];
  }
  const double uniform = 1.0 / static_cast<double>(utilities.size());
  std::vector<double> m(utilities.size());
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double u_term = sum_u > 0.0 ? utilities[k] / sum_u : uniform;
    m[k] = u_term - lambda * (costs[k] / sum_c);
  }
  return m;
}

SupernetState update_distribution(SupernetState state, std::span<const ArchitectureGradient> grads,
                                  std::span<const double> weights, double lr, ExecPolicy policy) {
  if (grads.size() != weights.size() || grads.empty())
    throw Error(Errc::ShapeMismatch, "need one weight per sampled architecture");
  const double scale = lr / static_cast<double>(grads.size());
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].size() != state.layers.size()) throw Error(Errc::ShapeMismatch, "gradient layer count mismatch");
    for (std::size_t l = 0; l < grads[k].size(); ++l)
      if (grads[k][l]) add_scaled(state.layers[l], scale * weights[k], *grads[k][l], policy);
  }
  ++state.version;
  return state;
}

namespace {

std::string op_id_of_node(const std::string& node) {
  const auto colon = node.find(':');
  return colon == std::string::npos ? node : node.substr(colon + 1);
}

}  // namespace

std::vector<OperatorStats> operator_stats(const OperatorRegistry& registry, std::span<const ExecutionTrace> traces) {
  std::vector<OperatorStats> stats(registry.size());
  for (const auto& t : traces) {
    for (const auto& [node, utility] : t.node_utilities) {
      const auto idx = registry.index_of(op_id_of_node(node));
      if (!idx) continue;  // operator merged away since this trace ran
      ++stats[*idx].runs;
      if (utility > 0.0) ++stats[*idx].successes;
    }
  }
  return stats;
}

std::vector<OperatorPatch> MockMutator::propose(const OperatorRegistry& registry, std::span<const ExecutionTrace> traces) {
  const auto stats = operator_stats(registry, traces);
  std::optional<std::size_t> worst;
  for (std::size_t i = 0; i < registry.size(); ++i) {
    if (registry[i].kind == OperatorKind::early_exit || stats[i].runs == 0) continue;
    if (!worst || stats[i].rate() < stats[*worst].rate()) worst = i;
  }
  if (!worst) return {};

  const auto& op = registry[*worst];
  OperatorPatch patch;
  patch.target_id = op.id;
  if (op.prompt.find(kSentence) == std::string::npos) patch.new_prompt = op.prompt + kSentence;
  if (op.temperature != 0.5) {
    const double stepped = op.temperature > 0.5 ? std::max(0.5, op.temperature - 0.1) : std::min(0.5, op.temperature + 0.1);
    patch.new_temperature = std::round(stepped * 10.0) / 10.0;
  }
  if (!patch.new_prompt && !patch.new_temperature) return {};
  std::ostringstream why;
  why << "operator '" << op.id << "' succeeded on " << stats[*worst].successes << "/" << stats[*worst].runs
      << " executions, the lowest in this window";
  patch.rationale = why.str();
  return {patch};
}

LlmMutator::LlmMutator(BackendConfig backend, std::shared_ptr<HttpTransport> transport, std::string model,
                       std::string task_description)
    : backend_(std::move(backend)), transport_(std::move(transport)), model_(std::move(model)), task_(std::move(task_description)) {}

std::string LlmMutator::render_prompt(const OperatorRegistry& registry, std::span<const ExecutionTrace> traces) const {
  const auto stats = operator_stats(registry, traces);
  std::ostringstream p;
  p << "# Overview\n"
       "You are an expert researcher who designs LLM-based agentic systems. You improve the building blocks "
       "(operators) of a multi-agent system: their prompts, sampling temperatures and how operator nodes are "
       "structured.\n";
  if (!task_.empty()) p << "Target task: " << task_ << "\n";
  p << "\n# Operator archive\nEach operator below is listed with its current prompt, temperature and the "
       "fraction of recent executions that produced a correct answer.\n";
  nlohmann::json archive = nlohmann::json::array();
  for (std::size_t i = 0; i < registry.size(); ++i) {
    const auto& op = registry[i];
    if (op.kind == OperatorKind::early_exit) continue;
    archive.push_back({{"id", op.id},
                       {"name", op.name},
                       {"description", op.profile_text},
                       {"prompt", op.prompt},
                       {"temperature", op.temperature},
                       {"executions", stats[i].runs},
                       {"successes", stats[i].successes}});
  }
  p << archive.dump(2) << "\n\n# Recent failures\n";
  std::size_t shown = 0;
  for (const auto& t : traces) {
    if (t.utility > 0.0 || shown >= 5) continue;
    ++shown;
    p << "- architecture ";
    for (std::size_t l = 0; l < t.architecture.layers.size(); ++l) {
      p << (l ? " -> " : "") << "[";
      for (std::size_t i = 0; i < t.architecture.layers[l].size(); ++i) p << (i ? ", " : "") << t.architecture.layers[l][i];
      p << "]";
    }
    p << " answered: " << t.final_answer.substr(0, 200) << "\n";
  }
  if (shown == 0) p << "(none)\n";
  p << "\n# Output format\n"
       "Reply with a single JSON object with keys, in order:\n"
       "- \"thought\": your analysis of which operator is weakest and why.\n"
       "- \"description\": one sentence describing the revised operator.\n"
       "- \"code\": an object {\"target_id\": <existing operator id>, \"new_prompt\": <full replacement prompt "
       "keeping the {input} placeholder, or null>, \"new_temperature\": <number in [0, 2] or null>, "
       "\"structure_action\": one of \"none\", \"split\", \"merge\", \"rewire\", \"merge_with\": <partner id when "
       "merging>}.\n"
       "Only prompt, temperature and structure edits are applied; do not return executable code.\n"
       "\n# Your task\n"
       "Study the archive and failures, decide which single operator change is most likely to raise accuracy "
       "without increasing cost, and return it in the format above.\n";
  return p.str();
}

OperatorPatch parse_mutation_reply(std::string_view content) {
  // Tolerate prose or code fences around the JSON object.
  const auto first = content.find('{');
  const auto last = content.rfind('}');
  if (first == std::string_view::npos || last == std::string_view::npos || last < first)
    throw Error(Errc::UnparseableMutation, "reply contains no JSON object");
  try {
    const auto j = nlohmann::json::parse(content.substr(first, last - first + 1));
    nlohmann::json code = j.at("code");
    if (code.is_string()) code = nlohmann::json::parse(code.get<std::string>());
    auto patch = code.get<OperatorPatch>();
    std::string rationale = j.value("thought", std::string());
    if (const auto d = j.value("description", std::string()); !d.empty()) rationale += (rationale.empty() ? "" : "\n") + d;
    patch.rationale = rationale;
    validate_patch(patch);
    return patch;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::UnparseableMutation, e.what());
  } catch (const Error& e) {
    throw Error(Errc::UnparseableMutation, e.what());
  }
}

std::vector<OperatorPatch> LlmMutator::propose(const OperatorRegistry& registry, std::span<const ExecutionTrace> traces) {
  OperatorSpec caller;
  caller.id = "mutator";
  caller.model_binding = model_;
  caller.temperature = 1.0;
  LiveCallResult reply;
  try {
    reply = live_call(caller, render_prompt(registry, traces), backend_, *transport_);
  } catch (const Error& e) {
    throw Error(Errc::MutatorUnavailable, e.what());
  }
  try {
    return {parse_mutation_reply(reply.content)};
  } catch (const Error& e) {
    std::cerr << "maas: skipping mutation: " << e.what() << "\n";
    return {};
  }
}

std::vector<OperatorPatch> textual_gradient(const OperatorRegistry& registry, std::span<const ExecutionTrace> traces,
                                            Mutator& mutator) {
  if (traces.empty()) return {};
  return mutator.propose(registry, traces);
}

void to_json(nlohmann::json& j, const StepMetrics& m) {
  j = {{"step", m.step},
       {"query_id", m.query_id},
       {"mean_utility", m.mean_utility},
       {"mean_cost", m.mean_cost},
       {"exit_histogram", m.exit_histogram},
       {"patches_applied", m.patches_applied}};
}

std::string exit_bucket(const Architecture& arch) {
  return arch.exit_layer ? std::to_string(*arch.exit_layer) : std::string("none");
}

SupernetTrainer::SupernetTrainer(TrainConfig config, OperatorRegistry registry,
                                 std::shared_ptr<const EmbeddingProvider> embedder,
                                 std::shared_ptr<const Environment> env, std::shared_ptr<Mutator> mutator)
    : SupernetTrainer(config, registry,
                      init_params(config.seed, {config.embed_dim, config.hidden, config.layers, registry.size()}),
                      std::move(embedder), std::move(env), std::move(mutator)) {}

SupernetTrainer::SupernetTrainer(TrainConfig config, OperatorRegistry registry, SupernetState state,
                                 std::shared_ptr<const EmbeddingProvider> embedder,
                                 std::shared_ptr<const Environment> env, std::shared_ptr<Mutator> mutator,
                                 std::size_t steps_done)
    : config_(std::move(config)),
      registry_(std::move(registry)),
      state_(std::move(state)),
      embedder_(std::move(embedder)),
      env_(std::move(env)),
      mutator_(std::move(mutator)),
      step_(steps_done) {
  config_.validate();
  registry_.require_complete();
  if (embedder_->dimension() != config_.embed_dim)
    throw Error(Errc::DimensionMismatch, "embedder dimension differs from config.embed_dim");
  op_embeddings_ = embed_operators(registry_, *embedder_);
}

StepMetrics SupernetTrainer::train_step(const QueryRecord& query) {
  const std::size_t K = config_.samples_k;
  const auto query_vec = embedder_->embed(query.query).values;
  const SamplingParams sp{config_.layers, config_.thres};

  std::vector<ExecutionTrace> traces(K);
  std::vector<ArchitectureGradient> grads(K);
  std::vector<std::exception_ptr> errors(K);
  const bool parallel = config_.policy == ExecPolicy::parallel;

  // Each sample owns its RNG stream, so results do not depend on scheduling.
  // Nested kernels stay serial inside the parallel region.
  const auto inner = parallel ? ExecPolicy::serial : config_.policy;
  std::atomic<bool> failed{false};
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(K); ++k) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      Rng rng(config_.seed, {stream::kSample, step_, static_cast<std::uint64_t>(k)});
      auto arch = sample_architecture(state_, registry_, op_embeddings_, query_vec, sp, SampleMode::train, &rng, inner);
      grads[k] = grad_architecture_log_prob(state_, arch, inner);
      traces[k] = execute(arch, registry_, query, *env_, rng);
    } catch (...) {
      errors[k] = std::current_exception();
      failed = true;
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> utilities(K), costs(K);
  StepMetrics metrics;
  metrics.step = step_;
  metrics.query_id = query.id;
  for (std::size_t k = 0; k < K; ++k) {
    utilities[k] = traces[k].utility;
    costs[k] = traces[k].cost;
    metrics.mean_utility += traces[k].utility / static_cast<double>(K);
    metrics.mean_cost += traces[k].cost / static_cast<double>(K);
    ++metrics.exit_histogram[exit_bucket(traces[k].architecture)];
  }

  const auto weights = importance_weights(utilities, costs, config_.lambda);
  state_ = update_distribution(std::move(state_), grads, weights, config_.lr, config_.policy);

  window_.insert(window_.end(), traces.begin(), traces.end());
  ++step_;
  if (mutator_ && config_.patch_every > 0 && step_ % config_.patch_every == 0) metrics.patches_applied = apply_patches();
  last_traces_ = std::move(traces);
  return metrics;
}

std::size_t SupernetTrainer::apply_patches() {
  const auto patches = textual_gradient(registry_, window_, *mutator_);
  window_.clear();
  std::size_t applied = 0;
  Rng rng(config_.seed, {stream::kRemap, step_});
  for (const auto& patch : patches) {
    try {
      auto patched = apply_patch(registry_, patch);
      remap_operators(state_, patched.change, rng);
      registry_ = std::move(patched.registry);
      ++applied;
    } catch (const Error& e) {
      std::cerr << "maas: patch for '" << patch.target_id << "' rejected: " << e.what() << "\n";
    }
  }
  if (applied) op_embeddings_ = embed_operators(registry_, *embedder_);
  return applied;
}

}  // namespace maas
