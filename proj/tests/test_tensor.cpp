#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "edukd/optim.hpp"
#include "edukd/rng.hpp"
#include "edukd/tensor.hpp"
#include "oracles.hpp"

using namespace edukd;

TEST_CASE("matmul basics", "[numerics]") {
  Tensor eye = Tensor::from_data(2, 2, {1, 0, 0, 1});
  Tensor v = Tensor::from_data(2, 1, {3, 4});
  Tensor out = matmul(eye, v);
  CHECK(out[0] == 3.0);
  CHECK(out[1] == 4.0);

  Tensor a = Tensor::from_data(2, 2, {1, 2, 3, 4});
  Tensor b = Tensor::from_data(2, 1, {5, 6});
  Tensor c = matmul(a, b);
  CHECK(c[0] == 17.0);  // frozen from hand arithmetic
  CHECK(c[1] == 39.0);

  Tensor z = Tensor::zeros(2, 2);
  Tensor any = Tensor::from_data(2, 2, {9, -3, 2, 7});
  Tensor zz = matmul(z, any);
  for (std::size_t i = 0; i < 4; ++i) CHECK(zz[i] == 0.0);

  Tensor bad = Tensor::zeros(3, 2);
  CHECK_THROWS_WITH(matmul(a, bad), Catch::Matchers::ContainsSubstring("2x2") &&
                                        Catch::Matchers::ContainsSubstring("3x2"));
}

TEST_CASE("elementwise ops", "[numerics]") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(edukd::tanh(Tensor::scalar(0.0)).item() == 0.0);

  Tensor s = add(Tensor::column({1, 2}), Tensor::column({3, 4}));
  CHECK(s[0] == 4.0);
  CHECK(s[1] == 6.0);

  CHECK_THROWS_AS(add(Tensor::column({1, 2}), Tensor::column({1, 2, 3})), std::invalid_argument);
  CHECK_THROWS_AS(mul(Tensor::zeros(2, 2), Tensor::zeros(2, 1)), std::invalid_argument);

  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    double x = rng.uniform(-30.0, 30.0);
    double sv = sigmoid(Tensor::scalar(x)).item();
    double tv = edukd::tanh(Tensor::scalar(x)).item();
    CHECK(sv > 0.0);
    CHECK(sv < 1.0);
    CHECK(tv >= -1.0);
    CHECK(tv <= 1.0);
  }
}

TEST_CASE("stable_softmax", "[numerics]") {
  Tensor u = stable_softmax(Tensor::column({7.5, 7.5, 7.5}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(u[i] == Catch::Approx(1.0 / 3.0).margin(1e-15));

  Tensor v = stable_softmax(Tensor::column({0.0, std::log(3.0)}));
  CHECK(v[0] == Catch::Approx(0.25).margin(1e-12));
  CHECK(v[1] == Catch::Approx(0.75).margin(1e-12));

  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng.pick(8);
    std::vector<double> raw(n);
    for (auto& x : raw) x = rng.uniform(-50.0, 50.0);
    Tensor a = stable_softmax(Tensor::column(raw));
    for (auto& x : raw) x += 1000.0;
    Tensor b = stable_softmax(Tensor::column(raw));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(a[i] >= 0.0);
      CHECK(a[i] == Catch::Approx(b[i]).margin(1e-12));
      sum += a[i];
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }

  CHECK_THROWS_AS(stable_softmax(Tensor::from_data(0, 1, {})), std::invalid_argument);
}

TEST_CASE("mse", "[numerics]") {
  Tensor a = Tensor::column({1, 2, 3});
  CHECK(mse(a, a).item() == 0.0);
  CHECK(mse(Tensor::column({0, 0}), Tensor::column({1, 1})).item() == 1.0);
  CHECK(mse(Tensor::column({1, 2}), Tensor::column({3, 5})).item() == 6.5);  // (4+9)/2

  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    Tensor x = Tensor::column({rng.normal(), rng.normal(), rng.normal()});
    Tensor y = Tensor::column({rng.normal(), rng.normal(), rng.normal()});
    CHECK(mse(x, y).item() == mse(y, x).item());
    CHECK(mse(x, y).item() >= 0.0);
  }

  CHECK_THROWS_AS(mse(Tensor::column({1}), Tensor::column({1, 2})), std::invalid_argument);
}

TEST_CASE("cross_entropy", "[numerics]") {
  CHECK(cross_entropy(Tensor::column({0, 0}), Tensor::column({1, 0})).item() ==
        Catch::Approx(std::log(2.0)).margin(1e-12));

  CHECK(cross_entropy(Tensor::column({60, -60}), Tensor::column({1, 0})).item() ==
        Catch::Approx(0.0).margin(1e-12));

  // soft target equal to softmax(logits) gives that distribution's entropy
  Tensor logits = Tensor::column({0.3, -1.1});
  Tensor p = stable_softmax(logits);
  double entropy = -(p[0] * std::log(p[0]) + p[1] * std::log(p[1]));
  CHECK(cross_entropy(logits, p).item() == Catch::Approx(entropy).margin(1e-12));

  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    Tensor l = Tensor::column({rng.uniform(-10, 10), rng.uniform(-10, 10)});
    Tensor hard = rng.uniform() < 0.5 ? Tensor::column({1, 0}) : Tensor::column({0, 1});
    CHECK(cross_entropy(l, hard).item() >= 0.0);
  }

  CHECK_THROWS_AS(cross_entropy(Tensor::column({0, 0}), Tensor::column({0.7, 0.7})),
                  std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy(Tensor::column({0, 0}), Tensor::column({-0.5, 1.5})),
                  std::invalid_argument);
}

TEST_CASE("backward basics", "[numerics]") {
  // loss = x^2 at x = 3 -> grad 6
  Tensor x = Tensor::scalar(3.0, true);
  {
    Tape tape;
    Tensor loss = mul(x, x);
    tape.backward(loss);
  }
  CHECK(x.grad()[0] == Catch::Approx(6.0).margin(1e-12));

  // constant loss: nothing depends on x
  x.zero_grad();
  {
    Tape tape;
    Tensor loss = add(Tensor::scalar(1.0), Tensor::scalar(2.0));
    CHECK_THROWS_AS(tape.backward(loss), std::invalid_argument);
  }

  // a second reverse pass without a new forward pass is an error
  {
    Tape tape;
    Tensor loss = mul(x, x);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
  }

  // backward with no recording tape at all
  Tensor detached = mul(x, x);
  CHECK_FALSE(detached.requires_grad());
}

TEST_CASE("gradients match central differences per op", "[numerics]") {
  Rng rng(7);
  auto rand_tensor = [&](std::size_t r, std::size_t c) {
    std::vector<double> d(r * c);
    for (auto& v : d) v = rng.uniform(-2.0, 2.0);
    return Tensor::from_data(r, c, std::move(d), true);
  };
  const int trials = 10;
  for (int trial = 0; trial < trials; ++trial) {
    Tensor a = rand_tensor(3, 2), b = rand_tensor(2, 4);
    auto fwd = [&] {
      Tensor c = matmul(a, b);
      Tensor loss = mse(c, Tensor::zeros(3, 4));
      return loss;
    };
    CHECK(oracle::max_grad_rel_err(fwd, {a, b}) < 1e-4);

    Tensor u = rand_tensor(4, 1), v = rand_tensor(4, 1);
    auto fwd2 = [&] { return mse(mul(sigmoid(u), edukd::tanh(v)), Tensor::zeros(4, 1)); };
    CHECK(oracle::max_grad_rel_err(fwd2, {u, v}) < 1e-4);

    Tensor s = rand_tensor(1, 1);
    auto fwd3 = [&] {
      Tensor z = add(sub(smul(s, u), scale(v, 1.7)), v);
      return mse(z, Tensor::zeros(4, 1));
    };
    CHECK(oracle::max_grad_rel_err(fwd3, {s, u, v}) < 1e-4);

    Tensor sm = rand_tensor(5, 1);
    Tensor target = Tensor::column({0.1, 0.2, 0.3, 0.15, 0.25});
    auto fwd4 = [&] { return mse(stable_softmax(sm), target); };
    CHECK(oracle::max_grad_rel_err(fwd4, {sm}) < 1e-4);

    Tensor lg = rand_tensor(2, 1);
    auto fwd5 = [&] { return cross_entropy(lg, Tensor::column({0.3, 0.7})); };
    CHECK(oracle::max_grad_rel_err(fwd5, {lg}) < 1e-4);

    Tensor p = rand_tensor(3, 1), q = rand_tensor(2, 1);
    auto fwd6 = [&] {
      Tensor joined = concat(p, q);
      Tensor t = transpose(joined);
      return mse(transpose(t), Tensor::zeros(5, 1));
    };
    CHECK(oracle::max_grad_rel_err(fwd6, {p, q}) < 1e-4);

    auto fwd7 = [&] {
      std::vector<Tensor> parts;
      for (std::size_t i = 0; i < p.size(); ++i) parts.push_back(index(p, i));
      Tensor stacked = stack_scalars(parts);
      return mse(stacked, Tensor::zeros(3, 1));
    };
    CHECK(oracle::max_grad_rel_err(fwd7, {p}) < 1e-4);
  }
}

TEST_CASE("adam", "[numerics]") {
  CHECK_THROWS_AS(Adam({Tensor::scalar(0.0, true)}, AdamConfig{.lr = 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(Adam({Tensor::scalar(0.0, true)}, AdamConfig{.lr = -1.0}),
                  std::invalid_argument);

  // zero gradient + zero decay is a fixed point
  Tensor w = Tensor::column({0.5, -0.25}, true);
  Adam opt({w}, AdamConfig{.lr = 0.01});
  w.zero_grad();
  opt.step();
  CHECK(w[0] == 0.5);
  CHECK(w[1] == -0.25);

  // first step from zero state moves opposite sign(g) by about lr
  Tensor w2 = Tensor::column({1.0, -1.0}, true);
  Adam opt2({w2}, AdamConfig{.lr = 0.01});
  w2.node()->grad = {0.3, -0.7};
  opt2.step();
  CHECK(w2[0] == Catch::Approx(1.0 - 0.01).epsilon(1e-4));
  CHECK(w2[1] == Catch::Approx(-1.0 + 0.01).epsilon(1e-4));

  // two identical calls with identical state are bit-identical
  auto run = [] {
    Tensor p = Tensor::column({0.1, 0.2, 0.3}, true);
    Adam o({p}, AdamConfig{.lr = 0.005, .weight_decay = 1e-5});
    for (int i = 0; i < 25; ++i) {
      p.node()->grad = {0.5 - i * 0.01, -0.2, 0.05 * i};
      o.step();
    }
    return p.values();
  };
  CHECK(run() == run());
}

TEST_CASE("rng determinism and draw sanity", "[numerics]") {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng r(9);
  double acc = 0.0;
  for (int i = 0; i < 20000; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    acc += u;
  }
  CHECK(acc / 20000.0 == Catch::Approx(0.5).margin(0.02));

  double nsum = 0.0, nsq = 0.0;
  for (int i = 0; i < 20000; ++i) {
    double x = r.normal();
    nsum += x;
    nsq += x * x;
  }
  CHECK(nsum / 20000.0 == Catch::Approx(0.0).margin(0.03));
  CHECK(nsq / 20000.0 == Catch::Approx(1.0).margin(0.05));

  double psum = 0.0;
  for (int i = 0; i < 5000; ++i) psum += static_cast<double>(r.poisson(6.5));
  CHECK(psum / 5000.0 == Catch::Approx(6.5).margin(0.25));

  double gsum = 0.0;
  for (int i = 0; i < 5000; ++i) gsum += r.gamma(2.0, 1.5);
  CHECK(gsum / 5000.0 == Catch::Approx(3.0).margin(0.15));

  long long big = r.poisson(2000.0);
  CHECK(big > 1500);
  CHECK(big < 2500);

  double nbsum = 0.0;
  for (int i = 0; i < 5000; ++i) nbsum += static_cast<double>(r.neg_binomial(12.0, 3.0));
  CHECK(nbsum / 5000.0 == Catch::Approx(12.0).margin(0.6));

  Rng s1(77), s2(77);
  std::vector<int> v1{1, 2, 3, 4, 5, 6, 7}, v2(v1);
  s1.shuffle(v1);
  s2.shuffle(v2);
  CHECK(v1 == v2);

  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
}
