#include <cmath>
#include <map>

#include "doctest.h"
#include "maas/controller.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace maas;

namespace {

std::vector<double> random_feature(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

std::vector<double> flatten(const LayerGradient& g) {
  std::vector<double> out = g.w1.data;
  out.insert(out.end(), g.b1.begin(), g.b1.end());
  out.insert(out.end(), g.w2.data.begin(), g.w2.data.end());
  out.insert(out.end(), g.b2.begin(), g.b2.end());
  return out;
}

ScoreVector scores_of(std::vector<double> s) {
  ScoreVector v;
  for (double x : s) v.logits.push_back(std::log(x));
  v.scores = std::move(s);
  return v;
}

}  // namespace

TEST_CASE("init_params shapes, range and determinism") {
  const ControllerDims dims{64, 64, 4, 9};
  const auto a = init_params(7, dims);
  CHECK(state_to_json(a).dump() == state_to_json(init_params(7, dims)).dump());
  CHECK_FALSE(a == init_params(8, dims));
  REQUIRE(a.layers.size() == 4);
  CHECK(a.layer(3).w1.rows == 64);
  CHECK(a.layer(3).w1.cols == 192);
  CHECK(a.layer(3).w2.rows == 9);
  for (const auto& lc : a.layers)
    for (double x : lc.w1.data) CHECK(std::abs(x) <= 0.1);
  CHECK(a.version == 0);
}

TEST_CASE("score_layer matches a straight-line forward pass") {
  const ControllerDims dims{16, 12, 3, 6};
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto state = init_params(trial, dims);
    for (std::size_t l = 1; l <= 3; ++l) {
      const auto x = random_feature(rng, 16 * l, 3.0);
      const auto got = score_layer(state, l, x);
      const auto want = oracle::forward(state.layer(l), x);
      double total = 0.0;
      for (std::size_t k = 0; k < 6; ++k) {
        CHECK(got.scores[k] == doctest::Approx(want.scores[k]).epsilon(1e-12));
        CHECK(got.logits[k] == doctest::Approx(want.logits[k]).epsilon(1e-12));
        total += got.scores[k];
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(score_layer(state, l, x, ExecPolicy::parallel).scores == got.scores);
    }
  }
  const auto state = init_params(1, dims);
  CHECK_ERRC(score_layer(state, 2, std::vector<double>(16)), Errc::DimensionMismatch);
}

TEST_CASE("zero parameters score uniformly; logit shifts do not matter") {
  auto state = init_params(3, {8, 8, 2, 5});
  for (auto& lc : state.layers) {
    std::fill(lc.w1.data.begin(), lc.w1.data.end(), 0.0);
    std::fill(lc.b1.begin(), lc.b1.end(), 0.0);
    std::fill(lc.w2.data.begin(), lc.w2.data.end(), 0.0);
    std::fill(lc.b2.begin(), lc.b2.end(), 0.0);
  }
  const std::vector<double> x(8, 0.5);
  for (double s : score_layer(state, 1, x).scores) CHECK(s == 0.2);

  auto shifted = init_params(3, {8, 8, 2, 5});
  const auto before = score_layer(shifted, 1, x).scores;
  for (auto& b : shifted.layer(1).b2) b += 12.5;
  const auto after = score_layer(shifted, 1, x).scores;
  for (std::size_t k = 0; k < 5; ++k) CHECK(after[k] == doctest::Approx(before[k]).epsilon(1e-14));
}

TEST_CASE("select_deterministic examples") {
  CHECK(select_deterministic(scores_of({0.5, 0.3, 0.2}), 0.3) == std::vector<std::size_t>{0});
  CHECK(select_deterministic(scores_of({0.2, 0.2, 0.6}), 0.7) == std::vector<std::size_t>{2, 0});
  CHECK(select_deterministic(scores_of({0.25, 0.25, 0.25, 0.25}), 0.3) == std::vector<std::size_t>{0, 1});
  CHECK(select_deterministic(scores_of({0.3, 0.7}), 0.99) == std::vector<std::size_t>{1, 0});
  CHECK(select_deterministic(scores_of({0.1, 0.2, 0.3, 0.4}), 0.999).size() == 4);
}

TEST_CASE("select_deterministic agrees with the prefix scan") {
  Rng rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    std::vector<double> raw(n);
    double z = 0.0;
    for (auto& x : raw) {
      x = rng.below(4) == 0 ? 0.25 : rng.uniform01();  // some ties
      z += x;
    }
    for (auto& x : raw) x /= z;
    for (double t : {0.1, 0.3, 0.7}) CHECK(select_deterministic(scores_of(raw), t) == oracle::minimal_prefix_scan(raw, t));
  }
}

TEST_CASE("sample_selection") {
  SUBCASE("single operator") {
    Rng rng(1);
    const auto sel = sample_selection(scores_of({1.0}), 0.3, rng);
    CHECK(sel.indices == std::vector<std::size_t>{0});
    CHECK(sel.log_prob == 0.0);
  }
  SUBCASE("dominant score") {
    const double eps = 1e-6;
    const auto s = scores_of({1 - 2 * eps, eps, eps});
    Rng rng(2);
    int first = 0;
    for (int i = 0; i < 10000; ++i) {
      const auto sel = sample_selection(s, 0.3, rng);
      if (sel.indices.front() == 0) {
        ++first;
        CHECK(sel.indices.size() == 1);
        CHECK(sel.log_prob == doctest::Approx(std::log(1 - 2 * eps)));
      }
    }
    CHECK(first >= 9990);
  }
  SUBCASE("log_prob matches the Plackett-Luce oracle and frequencies match") {
    const std::vector<double> raw{0.4, 0.35, 0.25};
    const auto s = scores_of(raw);
    const auto table = oracle::enumerate_selections(raw, 0.3);
    double total = 0.0;
    for (const auto& [seq, p] : table) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    std::map<std::vector<std::size_t>, int> counts;
    Rng rng(3);
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
      const auto sel = sample_selection(s, 0.3, rng);
      CHECK(sel.log_prob == doctest::Approx(std::log(oracle::pl_probability(raw, sel.indices))).epsilon(1e-12));
      CHECK(selection_log_prob(s, sel.indices) == sel.log_prob);
      ++counts[sel.indices];
    }
    double tv = 0.0;
    for (const auto& [seq, p] : table) tv += std::abs(p - static_cast<double>(counts[seq]) / n);
    CHECK(tv / 2 < 0.02);
  }
}

TEST_CASE("grad_log_prob matches finite differences") {
  const ControllerDims dims{6, 5, 3, 4};
  Rng rng(17);
  for (int trial = 0; trial < 12; ++trial) {
    const auto state = init_params(100 + trial, dims);
    const std::size_t l = 1 + trial % 3;
    const auto x = random_feature(rng, 6 * l, 2.0);
    const auto sel = sample_selection(score_layer(state, l, x), 0.3, rng);
    const auto got = flatten(grad_log_prob(state, l, x, sel.indices));
    const auto want = oracle::fd_gradient(state.layer(l), x, sel.indices, 1e-5);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-6).scale(1e-3));
  }
}

TEST_CASE("grad_log_prob edge cases") {
  const auto state = init_params(4, {4, 3, 1, 1});
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<std::size_t> only{0};
  for (double g : flatten(grad_log_prob(state, 1, x, only))) CHECK(g == 0.0);

  const auto s2 = init_params(4, {4, 3, 1, 3});
  const auto copy = s2;
  const std::vector<std::size_t> seq{2, 0};
  const auto g1 = grad_log_prob(s2, 1, x, seq);
  CHECK(s2 == copy);
  CHECK(grad_log_prob(s2, 1, x, seq, ExecPolicy::parallel) == g1);
}

TEST_CASE("remap_operators") {
  auto state = init_params(9, {4, 3, 2, 4});
  const auto before = state;
  Rng rng(1);
  remap_operators(state, {IndexChange::Kind::split, 1, 4, 0}, rng);
  CHECK(state.version == before.version + 1);
  CHECK(state.dims.n_ops == 5);
  for (std::size_t l = 1; l <= 2; ++l) {
    const auto& a = state.layer(l);
    const auto& b = before.layer(l);
    CHECK(a.w2.rows == 5);
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t i = 0; i < 3; ++i) CHECK(a.w2(k, i) == b.w2(k, i));
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(a.w2(4, i) - b.w2(1, i)) <= 0.01);
    CHECK(std::abs(a.b2[4] - b.b2[1]) <= 0.01);
    CHECK(a.w1 == b.w1);
  }
  remap_operators(state, {IndexChange::Kind::merge, 0, 0, 2}, rng);
  CHECK(state.dims.n_ops == 4);
  CHECK(state.layer(1).w2.rows == 4);
  CHECK(state.layer(1).b2[2] == before.layer(1).b2[3]);
}

TEST_CASE("state JSON round-trip is exact") {
  auto state = init_params(12, {8, 8, 3, 9});
  state.version = 41;
  const auto text = state_to_json(state).dump();
  const auto back = state_from_json(nlohmann::json::parse(text));
  CHECK(back == state);
  CHECK(state_to_json(back).dump() == text);

  auto bad = state_to_json(state);
  bad["layers"][1]["W1"]["shape"][1] = 7;
  CHECK_THROWS_AS(state_from_json(bad), Error);
}
