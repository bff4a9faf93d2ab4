#include "maas/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "maas/error.hpp"

namespace maas {

LayerGradient LayerGradient::zeros_like(const LayerController& c) {
  return {Matrix(c.w1.rows, c.w1.cols), std::vector<double>(c.b1.size(), 0.0), Matrix(c.w2.rows, c.w2.cols),
          std::vector<double>(c.b2.size(), 0.0)};
}

SupernetState init_params(std::uint64_t seed, const ControllerDims& dims) {
  if (dims.embed_dim == 0 || dims.hidden == 0 || dims.layers == 0 || dims.n_ops == 0)
    throw Error(Errc::InvalidConfig, "controller dimensions must be positive");
  Rng rng(seed);
  auto fill = [&rng](std::span<double> xs) {
    for (double& x : xs) x = rng.uniform(-0.1, 0.1);
  };
  SupernetState s;
  s.dims = dims;
  for (std::size_t l = 1; l <= dims.layers; ++l) {
    LayerController c;
    c.layer_index = l;
    c.w1 = Matrix(dims.hidden, dims.embed_dim * l);
    c.b1.assign(dims.hidden, 0.0);
    c.w2 = Matrix(dims.n_ops, dims.hidden);
    c.b2.assign(dims.n_ops, 0.0);
    fill(c.w1.data);
    fill(c.b1);
    fill(c.w2.data);
    fill(c.b2);
    s.layers.push_back(std::move(c));
  }
  return s;
}

namespace {

struct Forward {
  std::vector<double> hidden;  // tanh activations
  ScoreVector out;
};

void softmax(std::span<const double> logits, std::span<double> out) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (out[i] = std::exp(logits[i] - mx));
  for (double& x : out) x /= sum;
}

const LayerController& checked_layer(const SupernetState& state, std::size_t layer, std::size_t feature_len) {
  if (layer < 1 || layer > state.layers.size())
    throw Error(Errc::DimensionMismatch, "layer " + std::to_string(layer) + " out of range");
  const auto& c = state.layer(layer);
  if (feature_len != c.input_dim())
    throw Error(Errc::DimensionMismatch, "layer " + std::to_string(layer) + " expects a feature of length " +
                                             std::to_string(c.input_dim()) + ", got " + std::to_string(feature_len));
  return c;
}

Forward forward(const LayerController& c, std::span<const double> feature, ExecPolicy policy) {
  Forward f;
  f.hidden.resize(c.w1.rows);
  kernels::gemv(policy, c.w1, feature, c.b1, f.hidden);
  for (double& a : f.hidden) a = std::tanh(a);
  f.out.logits.resize(c.w2.rows);
  kernels::gemv(policy, c.w2, f.hidden, c.b2, f.out.logits);
  f.out.scores.resize(c.w2.rows);
  softmax(f.out.logits, f.out.scores);
  return f;
}

double log_sum_exp(std::span<const double> logits, const std::vector<bool>& mask) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) mx = std::max(mx, logits[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) sum += std::exp(logits[i] - mx);
  return mx + std::log(sum);
}

}  // namespace

ScoreVector score_layer(const SupernetState& state, std::size_t layer, std::span<const double> feature,
                        ExecPolicy policy) {
  return forward(checked_layer(state, layer, feature.size()), feature, policy).out;
}

std::vector<std::size_t> select_deterministic(const ScoreVector& s, double thres) {
  std::vector<std::size_t> order(s.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  double cum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    cum += s.scores[order[k]];
    if (cum > thres) {
      order.resize(k + 1);
      break;
    }
  }
  return order;
}

Selection sample_selection(const ScoreVector& s, double thres, Rng& rng) {
  const std::size_t n = s.scores.size();
  std::vector<bool> remaining(n, true);
  Selection sel;
  double drawn_mass = 0.0;
  while (sel.indices.size() < n) {
    double left = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (remaining[i]) left += s.scores[i];
    const double u = rng.uniform01() * left;
    std::size_t pick = n;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!remaining[i]) continue;
      pick = i;  // last remaining absorbs rounding at the top of the range
      acc += s.scores[i];
      if (u < acc) break;
    }
    sel.log_prob += s.logits[pick] - log_sum_exp(s.logits, remaining);
    remaining[pick] = false;
    sel.indices.push_back(pick);
    drawn_mass += s.scores[pick];
    if (drawn_mass > thres) break;
  }
  return sel;
}

double selection_log_prob(const ScoreVector& s, std::span<const std::size_t> sequence) {
  std::vector<bool> remaining(s.logits.size(), true);
  double lp = 0.0;
  for (std::size_t i : sequence) {
    if (i >= remaining.size() || !remaining[i])
      throw Error(Errc::DimensionMismatch, "selection sequence has an invalid or repeated index");
    lp += s.logits[i] - log_sum_exp(s.logits, remaining);
    remaining[i] = false;
  }
  return lp;
}

LayerGradient grad_log_prob(const SupernetState& state, std::size_t layer, std::span<const double> feature,
                            std::span<const std::size_t> sequence, ExecPolicy policy) {
  const auto& c = checked_layer(state, layer, feature.size());
  const Forward f = forward(c, feature, policy);
  const std::size_t n = c.n_ops();

  // d log p / d logits: each draw j contributes e_{i_j} - softmax over the
  // operators still undrawn at step j.
  std::vector<double> g_logits(n, 0.0);
  std::vector<bool> remaining(n, true);
  for (std::size_t pick : sequence) {
    if (pick >= n || !remaining[pick])
      throw Error(Errc::DimensionMismatch, "selection sequence has an invalid or repeated index");
    const double lse = log_sum_exp(f.out.logits, remaining);
    for (std::size_t k = 0; k < n; ++k)
      if (remaining[k]) g_logits[k] -= std::exp(f.out.logits[k] - lse);
    g_logits[pick] += 1.0;
    remaining[pick] = false;
  }

  LayerGradient g = LayerGradient::zeros_like(c);
  kernels::add_outer(policy, g.w2, 1.0, g_logits, f.hidden);
  g.b2 = g_logits;

  std::vector<double> g_hidden(c.w1.rows);
  kernels::gemv_t(policy, c.w2, g_logits, g_hidden);
  for (std::size_t i = 0; i < g_hidden.size(); ++i) g_hidden[i] *= 1.0 - f.hidden[i] * f.hidden[i];
  kernels::add_outer(policy, g.w1, 1.0, g_hidden, feature);
  g.b1 = std::move(g_hidden);
  return g;
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw Error(Errc::ShapeMismatch, "parameter/gradient shape mismatch");
}

template <typename P>
void add_scaled_impl(P& params, double scale, const LayerGradient& grad, ExecPolicy policy) {
  check_same_shape(params.w1, grad.w1);
  check_same_shape(params.w2, grad.w2);
  if (params.b1.size() != grad.b1.size() || params.b2.size() != grad.b2.size())
    throw Error(Errc::ShapeMismatch, "parameter/gradient shape mismatch");
  kernels::axpy(policy, params.w1.data, scale, grad.w1.data);
  kernels::axpy(policy, params.b1, scale, grad.b1);
  kernels::axpy(policy, params.w2.data, scale, grad.w2.data);
  kernels::axpy(policy, params.b2, scale, grad.b2);
}

}  // namespace

void add_scaled(LayerController& params, double scale, const LayerGradient& grad, ExecPolicy policy) {
  add_scaled_impl(params, scale, grad, policy);
}

void add_scaled(LayerGradient& acc, double scale, const LayerGradient& grad, ExecPolicy policy) {
  add_scaled_impl(acc, scale, grad, policy);
}

void remap_operators(SupernetState& state, const IndexChange& change, Rng& rng) {
  if (change.kind == IndexChange::Kind::none) return;
  for (auto& c : state.layers) {
    if (change.kind == IndexChange::Kind::split) {
      if (change.parent >= c.w2.rows || change.added != c.w2.rows)
        throw Error(Errc::ShapeMismatch, "split index change does not match controller width");
      std::vector<double> row(c.w2.row(change.parent).begin(), c.w2.row(change.parent).end());
      for (double& x : row) x += rng.uniform(-0.01, 0.01);
      c.w2.data.insert(c.w2.data.end(), row.begin(), row.end());
      ++c.w2.rows;
      c.b2.push_back(c.b2[change.parent] + rng.uniform(-0.01, 0.01));
    } else {
      if (change.removed >= c.w2.rows) throw Error(Errc::ShapeMismatch, "merge index out of range");
      const auto first = c.w2.data.begin() + static_cast<std::ptrdiff_t>(change.removed * c.w2.cols);
      c.w2.data.erase(first, first + static_cast<std::ptrdiff_t>(c.w2.cols));
      --c.w2.rows;
      c.b2.erase(c.b2.begin() + static_cast<std::ptrdiff_t>(change.removed));
    }
  }
  state.dims.n_ops = state.layers.front().w2.rows;
  ++state.version;
}

void to_json(nlohmann::json& j, const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows; ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  j = {{"shape", {m.rows, m.cols}}, {"data", std::move(rows)}};
}

void from_json(const nlohmann::json& j, Matrix& m) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) throw Error(Errc::ShapeMismatch, "matrix shape must have two entries");
  m = Matrix(shape[0], shape[1]);
  const auto& rows = j.at("data");
  if (rows.size() != m.rows) throw Error(Errc::ShapeMismatch, "matrix row count disagrees with shape");
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto row = rows[r].get<std::vector<double>>();
    if (row.size() != m.cols) throw Error(Errc::ShapeMismatch, "matrix row length disagrees with shape");
    std::copy(row.begin(), row.end(), m.row(r).begin());
  }
}

namespace {

nlohmann::json vec_json(const std::vector<double>& v) { return {{"shape", {v.size()}}, {"data", v}}; }

std::vector<double> vec_from(const nlohmann::json& j) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  auto v = j.at("data").get<std::vector<double>>();
  if (shape.size() != 1 || shape[0] != v.size()) throw Error(Errc::ShapeMismatch, "vector length disagrees with shape");
  return v;
}

}  // namespace

nlohmann::json state_to_json(const SupernetState& state) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& c : state.layers)
    layers.push_back({{"layer", c.layer_index}, {"W1", c.w1}, {"b1", vec_json(c.b1)}, {"W2", c.w2}, {"b2", vec_json(c.b2)}});
  return {{"dims",
           {{"embed_dim", state.dims.embed_dim},
            {"hidden", state.dims.hidden},
            {"layers", state.dims.layers},
            {"n_ops", state.dims.n_ops}}},
          {"activation", "tanh"},
          {"version", state.version},
          {"layers", std::move(layers)}};
}

SupernetState state_from_json(const nlohmann::json& j) {
  SupernetState s;
  const auto& d = j.at("dims");
  s.dims = {d.at("embed_dim").get<std::size_t>(), d.at("hidden").get<std::size_t>(), d.at("layers").get<std::size_t>(),
            d.at("n_ops").get<std::size_t>()};
  s.version = j.at("version").get<std::uint64_t>();
  for (const auto& lj : j.at("layers")) {
    LayerController c;
    c.layer_index = lj.at("layer").get<std::size_t>();
    c.w1 = lj.at("W1").get<Matrix>();
    c.b1 = vec_from(lj.at("b1"));
    c.w2 = lj.at("W2").get<Matrix>();
    c.b2 = vec_from(lj.at("b2"));
    if (c.w1.rows != s.dims.hidden || c.w1.cols != s.dims.embed_dim * c.layer_index || c.b1.size() != c.w1.rows ||
        c.w2.cols != s.dims.hidden || c.w2.rows != s.dims.n_ops || c.b2.size() != c.w2.rows)
      throw Error(Errc::ShapeMismatch, "controller layer " + std::to_string(c.layer_index) + " has inconsistent shapes");
    s.layers.push_back(std::move(c));
  }
  if (s.layers.size() != s.dims.layers) throw Error(Errc::ShapeMismatch, "controller layer count disagrees with dims");
  return s;
}

}  // namespace maas
