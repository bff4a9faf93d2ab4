#pragma once

// Test-only reference implementations. These deliberately share no code with
// the library paths they check.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "maas/controller.hpp"

namespace oracle {

// Straight-line forward pass: logits = W2 tanh(W1 x + b1) + b2, scores = softmax.
struct ForwardResult {
  std::vector<double> logits;
  std::vector<double> scores;
};

inline ForwardResult forward(const maas::LayerController& c, const std::vector<double>& x) {
  const std::size_t h = c.b1.size();
  const std::size_t n = c.b2.size();
  std::vector<double> hidden(h);
  for (std::size_t i = 0; i < h; ++i) {
    double acc = c.b1[i];
    for (std::size_t j = 0; j < x.size(); ++j) acc += c.w1.data[i * x.size() + j] * x[j];
    hidden[i] = std::tanh(acc);
  }
  ForwardResult r;
  r.logits.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = c.b2[k];
    for (std::size_t i = 0; i < h; ++i) acc += c.w2.data[k * h + i] * hidden[i];
    r.logits[k] = acc;
  }
  double z = 0.0;
  for (double l : r.logits) z += std::exp(l);
  for (double l : r.logits) r.scores.push_back(std::exp(l) / z);
  return r;
}

// Plackett-Luce probability of drawing `seq` in order: prod s_i / (mass left).
inline double pl_probability(const std::vector<double>& scores, const std::vector<std::size_t>& seq) {
  double p = 1.0;
  std::vector<bool> used(scores.size(), false);
  for (std::size_t i : seq) {
    double left = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k)
      if (!used[k]) left += scores[k];
    p *= scores[i] / left;
    used[i] = true;
  }
  return p;
}

// Every draw sequence the cumulative-mass stopping rule can emit, with its probability.
inline std::vector<std::pair<std::vector<std::size_t>, double>> enumerate_selections(const std::vector<double>& scores,
                                                                                     double thres) {
  std::vector<std::pair<std::vector<std::size_t>, double>> out;
  std::function<void(std::vector<std::size_t>&, double, double)> rec = [&](std::vector<std::size_t>& seq, double mass,
                                                                           double prob) {
    if (mass > thres || seq.size() == scores.size()) {
      out.emplace_back(seq, prob);
      return;
    }
    double left = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k)
      if (std::find(seq.begin(), seq.end(), k) == seq.end()) left += scores[k];
    for (std::size_t k = 0; k < scores.size(); ++k) {
      if (std::find(seq.begin(), seq.end(), k) != seq.end()) continue;
      seq.push_back(k);
      rec(seq, mass + scores[k], prob * scores[k] / left);
      seq.pop_back();
    }
  };
  std::vector<std::size_t> seq;
  rec(seq, 0.0, 1.0);
  return out;
}

// Smallest k whose top-k mass (descending, ties to lower index) exceeds thres.
inline std::vector<std::size_t> minimal_prefix_scan(const std::vector<double>& scores, double thres) {
  std::vector<std::size_t> ranked;
  std::vector<bool> taken(scores.size(), false);
  for (std::size_t r = 0; r < scores.size(); ++r) {
    std::size_t best = scores.size();
    for (std::size_t k = 0; k < scores.size(); ++k)
      if (!taken[k] && (best == scores.size() || scores[k] > scores[best])) best = k;
    taken[best] = true;
    ranked.push_back(best);
  }
  for (std::size_t k = 1; k <= ranked.size(); ++k) {
    double mass = 0.0;
    for (std::size_t j = 0; j < k; ++j) mass += scores[ranked[j]];
    if (mass > thres) return {ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k)};
  }
  return ranked;
}

// Signed feature hashing as documented: lowercase, split on non-alphanumerics,
// bucket = FNV-1a(token) mod d, sign from the top bit of SplitMix64(FNV-1a).
inline std::vector<double> hashed_embedding(const std::string& text, std::size_t d) {
  std::vector<std::string> toks(1);
  for (unsigned char c : text) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
      toks.back().push_back(static_cast<char>(c));
    } else if (c >= 'A' && c <= 'Z') {
      toks.back().push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (!toks.back().empty()) {
      toks.emplace_back();
    }
  }
  std::vector<double> v(d, 0.0);
  for (const auto& t : toks) {
    if (t.empty()) continue;
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : t) h = (h ^ c) * 1099511628211ULL;
    std::uint64_t z = h + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    v[h % d] += (z >> 63) ? -1.0 : 1.0;
  }
  double n = 0.0;
  for (double x : v) n += x * x;
  if (n > 0.0)
    for (double& x : v) x /= std::sqrt(n);
  return v;
}

// Feature for layer l: query || sum(V_1) || ... || sum(V_{l-1}).
inline std::vector<double> feature(const std::vector<double>& q, const std::vector<std::vector<std::size_t>>& prev_layers,
                                   const std::vector<std::vector<double>>& op_embeddings) {
  std::vector<double> f = q;
  for (const auto& layer : prev_layers) {
    std::vector<double> s(q.size(), 0.0);
    for (std::size_t i : layer)
      for (std::size_t k = 0; k < q.size(); ++k) s[k] += op_embeddings[i][k];
    f.insert(f.end(), s.begin(), s.end());
  }
  return f;
}

// Probability of every reachable architecture (keyed by the per-layer draw
// sequences), walking layers with the oracle forward pass.
inline std::map<std::vector<std::vector<std::size_t>>, double> enumerate_architectures(
    const maas::SupernetState& state, const std::vector<double>& q, const std::vector<std::vector<double>>& op_embeddings,
    std::size_t exit_index, std::size_t max_layers, double thres) {
  std::map<std::vector<std::vector<std::size_t>>, double> out;
  std::function<void(std::vector<std::vector<std::size_t>>&, double)> rec = [&](auto& draws, double prob) {
    const std::size_t l = draws.size() + 1;
    const auto f = feature(q, draws, op_embeddings);
    const auto scores = forward(state.layers[l - 1], f).scores;
    for (const auto& [seq, p] : enumerate_selections(scores, thres)) {
      draws.push_back(seq);
      const bool exits = std::find(seq.begin(), seq.end(), exit_index) != seq.end();
      if (exits || l == max_layers) {
        out[draws] += prob * p;
      } else {
        rec(draws, prob * p);
      }
      draws.pop_back();
    }
  };
  std::vector<std::vector<std::size_t>> draws;
  rec(draws, 1.0);
  return out;
}

// log P(seq) under Plackett-Luce, computed from logits.
inline double pl_log_prob(const std::vector<double>& logits, const std::vector<std::size_t>& seq) {
  std::vector<bool> used(logits.size(), false);
  double lp = 0.0;
  for (std::size_t i : seq) {
    double m = -INFINITY;
    for (std::size_t k = 0; k < logits.size(); ++k)
      if (!used[k]) m = std::max(m, logits[k]);
    double z = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k)
      if (!used[k]) z += std::exp(logits[k] - m);
    lp += logits[i] - m - std::log(z);
    used[i] = true;
  }
  return lp;
}

// Central finite differences of log P(seq) for every parameter of one layer,
// flattened as W1, b1, W2, b2. Only the pre-activation a perturbation touches
// is recomputed; everything else is the exact function value.
inline std::vector<double> fd_gradient(const maas::LayerController& c, const std::vector<double>& x,
                                       const std::vector<std::size_t>& seq, double eps) {
  const std::size_t h = c.b1.size(), n = c.b2.size(), in = x.size();
  std::vector<double> pre(h);
  for (std::size_t i = 0; i < h; ++i) {
    double acc = c.b1[i];
    for (std::size_t j = 0; j < in; ++j) acc += c.w1.data[i * in + j] * x[j];
    pre[i] = acc;
  }
  std::vector<double> act(h);
  for (std::size_t i = 0; i < h; ++i) act[i] = std::tanh(pre[i]);
  // Hidden activations with unit `ui` recomputed from pre-activation `v`.
  auto with_unit = [&](std::size_t ui, double v) {
    auto a = act;
    a[ui] = std::tanh(v);
    return a;
  };
  // Output-layer entry (k, i) replaced by w + delta; i == h addresses b2[k].
  auto value = [&](const std::vector<double>& a, std::size_t pk = SIZE_MAX, std::size_t pi = 0, double delta = 0.0) {
    std::vector<double> logits(n);
    for (std::size_t k = 0; k < n; ++k) {
      double acc = c.b2[k] + (k == pk && pi == h ? delta : 0.0);
      for (std::size_t i = 0; i < h; ++i) {
        const double w = k == pk && i == pi ? c.w2.data[k * h + i] + delta : c.w2.data[k * h + i];
        acc += w * a[i];
      }
      logits[k] = acc;
    }
    return pl_log_prob(logits, seq);
  };
  std::vector<double> g;
  g.reserve(h * in + h + n * h + n);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < in; ++j) {
      // (w + eps) * x differs from w * x + eps * x in rounding; use the former.
      const double w = c.w1.data[i * in + j];
      const double base = pre[i] - w * x[j];
      g.push_back((value(with_unit(i, base + (w + eps) * x[j])) - value(with_unit(i, base + (w - eps) * x[j]))) /
                  (2 * eps));
    }
  for (std::size_t i = 0; i < h; ++i)
    g.push_back((value(with_unit(i, pre[i] + eps)) - value(with_unit(i, pre[i] - eps))) / (2 * eps));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < h; ++i) g.push_back((value(act, k, i, eps) - value(act, k, i, -eps)) / (2 * eps));
  for (std::size_t k = 0; k < n; ++k) g.push_back((value(act, k, h, eps) - value(act, k, h, -eps)) / (2 * eps));
  return g;
}

}  // namespace oracle
