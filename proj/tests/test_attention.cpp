#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "edukd/attention.hpp"
#include "edukd/rng.hpp"
#include "oracles.hpp"

using namespace edukd;

namespace {

HiddenTrajectory traj_of(std::initializer_list<std::vector<double>> states) {
  HiddenTrajectory t;
  for (const auto& s : states) t.h.push_back(Tensor::column(s));
  return t;
}

}  // namespace

TEST_CASE("alignment scores", "[attention]") {
  // identity bilinear form on orthogonal states
  auto traj = traj_of({{0, 1}, {1, 0}});
  AttentionParams eye{Tensor::from_data(2, 2, {1, 0, 0, 1}, true)};
  Tensor e = alignment_scores(traj, eye);
  CHECK(e[0] == 0.0);
  CHECK(e[1] == 1.0);  // ||h_n||^2

  AttentionParams zero{Tensor::zeros(2, 2, true)};
  Tensor ez = alignment_scores(traj, zero);
  CHECK(ez[0] == 0.0);
  CHECK(ez[1] == 0.0);

  // hand instance: key [1,0], other [0,1], W = [[0,2],[0,0]] -> score 2
  AttentionParams w{Tensor::from_data(2, 2, {0, 2, 0, 0}, true)};
  Tensor eh = alignment_scores(traj, w);
  CHECK(eh[0] == 2.0);
  CHECK(eh[1] == 0.0);

  AttentionParams wrong{Tensor::zeros(3, 3, true)};
  CHECK_THROWS_AS(alignment_scores(traj, wrong), std::invalid_argument);
  CHECK_THROWS_AS(alignment_scores(HiddenTrajectory{}, eye), std::invalid_argument);
}

TEST_CASE("attention weights", "[attention]") {
  Tensor uniform = attention_weights(Tensor::column({3.3, 3.3, 3.3, 3.3}));
  for (std::size_t i = 0; i < 4; ++i) CHECK(uniform[i] == Catch::Approx(0.25).margin(1e-15));

  Tensor peaked = attention_weights(Tensor::column({50.0, 0.0, 0.0}));
  CHECK(peaked[0] > 1.0 - 1e-12);

  Tensor closed = attention_weights(Tensor::column({0.0, std::log(3.0)}));
  CHECK(closed[0] == Catch::Approx(0.25).margin(1e-12));
  CHECK(closed[1] == Catch::Approx(0.75).margin(1e-12));
}

TEST_CASE("context vector", "[attention]") {
  auto traj = traj_of({{1, 2}, {3, 4}, {5, 6}});

  Tensor onehot = Tensor::column({0, 1, 0});
  Tensor c = context_vector(onehot, traj);
  CHECK(c[0] == 3.0);
  CHECK(c[1] == 4.0);

  auto same = traj_of({{0.5, -0.5}, {0.5, -0.5}, {0.5, -0.5}});
  Tensor alpha = Tensor::column({0.2, 0.5, 0.3});
  Tensor cs = context_vector(alpha, same);
  CHECK(cs[0] == Catch::Approx(0.5).margin(1e-12));
  CHECK(cs[1] == Catch::Approx(-0.5).margin(1e-12));

  // random instance against hand summation in the same order
  Rng rng(8);
  HiddenTrajectory rt;
  for (int t = 0; t < 3; ++t) {
    std::vector<double> v(4);
    for (auto& x : v) x = rng.uniform(-1, 1);
    rt.h.push_back(Tensor::column(v));
  }
  std::vector<double> ev{0.3, -0.8, 1.1};
  Tensor a = attention_weights(Tensor::column(ev));
  Tensor cv = context_vector(a, rt);
  for (std::size_t i = 0; i < 4; ++i) {
    double expect = a[0] * rt.h[0][i];
    for (std::size_t t = 1; t < 3; ++t) expect += a[t] * rt.h[t][i];
    CHECK(cv[i] == expect);
  }

  CHECK_THROWS_AS(context_vector(Tensor::column({1, 0}), traj), std::invalid_argument);
}

TEST_CASE("attention invariants over random instances", "[attention]") {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 2 + rng.pick(6), r = 2 + rng.pick(5);
    HiddenTrajectory traj;
    for (std::size_t t = 0; t < n; ++t) {
      std::vector<double> v(r);
      for (auto& x : v) x = rng.uniform(-1, 1);
      traj.h.push_back(Tensor::column(v));
    }
    AttentionParams w = AttentionParams::init(r, rng);
    AttentionOutput out = attend(traj, w);

    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(out.weights[i] >= 0.0);
      sum += out.weights[i];
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);

    // convex combination bound
    double cmax = 0.0, hmax = 0.0;
    for (std::size_t i = 0; i < r; ++i) cmax = std::max(cmax, std::fabs(out.context[i]));
    for (const auto& h : traj.h)
      for (std::size_t i = 0; i < r; ++i) hmax = std::max(hmax, std::fabs(h[i]));
    CHECK(cmax <= hmax + 1e-12);

    // permuting the non-final states permutes e and alpha identically
    // and leaves the context unchanged
    std::vector<std::size_t> perm(n - 1);
    std::iota(perm.begin(), perm.end(), 0u);
    rng.shuffle(perm);
    HiddenTrajectory shuffled;
    for (std::size_t i = 0; i < n - 1; ++i) shuffled.h.push_back(traj.h[perm[i]]);
    shuffled.h.push_back(traj.h.back());
    AttentionOutput out2 = attend(shuffled, w);
    for (std::size_t i = 0; i < n - 1; ++i) {
      CHECK(out2.scores[i] == out.scores[perm[i]]);
      CHECK(out2.weights[i] == Catch::Approx(out.weights[perm[i]]).margin(1e-12));
    }
    for (std::size_t i = 0; i < r; ++i)
      CHECK(out2.context[i] == Catch::Approx(out.context[i]).margin(1e-12));
  }
}

TEST_CASE("attention output matches the hand oracle", "[attention]") {
  Rng rng(19);
  for (int trial = 0; trial < 25; ++trial) {
    std::size_t n = 3 + rng.pick(5), r = 4;
    HiddenTrajectory traj;
    std::vector<std::vector<double>> raw;
    for (std::size_t t = 0; t < n; ++t) {
      std::vector<double> v(r);
      for (auto& x : v) x = rng.uniform(-1, 1);
      raw.push_back(v);
      traj.h.push_back(Tensor::column(v));
    }
    AttentionParams w = AttentionParams::init(r, rng);
    AttentionOutput out = attend(traj, w);
    auto ref = oracle::ref_attention(w.w.values(), r, raw);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(out.scores[i] == Catch::Approx(ref.e[i]).margin(1e-12));
      CHECK(out.weights[i] == Catch::Approx(ref.alpha[i]).margin(1e-12));
    }
    for (std::size_t i = 0; i < r; ++i)
      CHECK(out.context[i] == Catch::Approx(ref.context[i]).margin(1e-12));
  }
}

TEST_CASE("attention gradients match finite differences", "[attention]") {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t n = 2 + rng.pick(4), r = 3;
    HiddenTrajectory traj;
    for (std::size_t t = 0; t < n; ++t) {
      std::vector<double> v(r);
      for (auto& x : v) x = rng.uniform(-1, 1);
      traj.h.push_back(Tensor::column(std::move(v), true));
    }
    AttentionParams w = AttentionParams::init(r, rng);
    std::vector<double> tv(r);
    for (auto& x : tv) x = rng.uniform(-1, 1);
    Tensor target = Tensor::column(tv);
    auto fwd = [&] { return mse(attend(traj, w).context, target); };
    std::vector<Tensor> inputs = traj.h;
    inputs.push_back(w.w);
    CHECK(oracle::max_grad_rel_err(fwd, inputs) < 1e-4);
  }
}
