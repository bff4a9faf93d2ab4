#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "maas/kernels.hpp"
#include "maas/operator_registry.hpp"
#include "maas/rng.hpp"

namespace maas {

struct ControllerDims {
  std::size_t embed_dim = 64;   // d
  std::size_t hidden = 64;      // h
  std::size_t layers = 4;       // L
  std::size_t n_ops = 9;

  bool operator==(const ControllerDims&) const = default;
};

// Scoring network for one supernet layer l (1-based):
//   logits = W2 tanh(W1 x + b1) + b2,  x in R^{d*l}.
struct LayerController {
  std::size_t layer_index = 1;
  Matrix w1;  // h x (d*l)
  std::vector<double> b1;
  Matrix w2;  // n_ops x h
  std::vector<double> b2;

  std::size_t input_dim() const noexcept { return w1.cols; }
  std::size_t n_ops() const noexcept { return w2.rows; }
  bool operator==(const LayerController&) const = default;
};

// Gradient with the same shapes as a LayerController's parameters.
struct LayerGradient {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;

  static LayerGradient zeros_like(const LayerController& c);
  bool operator==(const LayerGradient&) const = default;
};

// Controller parameters for every layer. `version` increments on every
// parameter update so stale architectures can be detected.
struct SupernetState {
  ControllerDims dims;
  std::vector<LayerController> layers;
  std::uint64_t version = 0;

  const LayerController& layer(std::size_t l) const { return layers.at(l - 1); }
  LayerController& layer(std::size_t l) { return layers.at(l - 1); }
  bool operator==(const SupernetState&) const = default;
};

struct ScoreVector {
  std::vector<double> scores;  // softmax(logits)
  std::vector<double> logits;
};

struct Selection {
  std::vector<std::size_t> indices;  // in draw order
  double log_prob = 0.0;
};

// Entries i.i.d. uniform in [-0.1, 0.1] from a seeded mt19937_64.
SupernetState init_params(std::uint64_t seed, const ControllerDims& dims);

ScoreVector score_layer(const SupernetState& state, std::size_t layer, std::span<const double> feature,
                        ExecPolicy policy = ExecPolicy::serial);

// Minimal prefix of the scores sorted descending (ties by ascending index)
// whose cumulative mass strictly exceeds `thres`.
std::vector<std::size_t> select_deterministic(const ScoreVector& s, double thres);

// Sequential draws without replacement, each proportional to score among the
// undrawn operators, until the drawn ORIGINAL score mass exceeds `thres`.
// log_prob is the Plackett-Luce prefix log-probability of the drawn sequence.
Selection sample_selection(const ScoreVector& s, double thres, Rng& rng);

// Plackett-Luce prefix log-probability of `sequence`, computed from logits.
double selection_log_prob(const ScoreVector& s, std::span<const std::size_t> sequence);

// d/dphi log p(sequence) for layer `layer`, through softmax and both dense layers.
LayerGradient grad_log_prob(const SupernetState& state, std::size_t layer, std::span<const double> feature,
                            std::span<const std::size_t> sequence, ExecPolicy policy = ExecPolicy::serial);

// params += scale * grad
void add_scaled(LayerController& params, double scale, const LayerGradient& grad,
                ExecPolicy policy = ExecPolicy::serial);
void add_scaled(LayerGradient& acc, double scale, const LayerGradient& grad, ExecPolicy policy = ExecPolicy::serial);

// Follow a registry index change: split appends a copy of the parent's output
// row plus U[-0.01, 0.01] noise, merge deletes the absorbed row.
void remap_operators(SupernetState& state, const IndexChange& change, Rng& rng);

void to_json(nlohmann::json& j, const Matrix& m);
void from_json(const nlohmann::json& j, Matrix& m);
nlohmann::json state_to_json(const SupernetState& state);
SupernetState state_from_json(const nlohmann::json& j);

}  // namespace maas
