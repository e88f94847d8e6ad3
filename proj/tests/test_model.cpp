#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <set>

#include "edukd/model.hpp"
#include "edukd/rng.hpp"
#include "oracles.hpp"

using namespace edukd;

namespace {

std::vector<Tensor> random_sequence(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<Tensor> xs;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(k);
    for (auto& x : v) x = rng.uniform(0.0, 1.0);
    xs.push_back(Tensor::column(std::move(v)));
  }
  return xs;
}

ModelParams zero_model(const ModelConfig& cfg) {
  ModelParams p = ModelParams::init(cfg, 1);
  for (auto& t : param_groups(p).all())
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.0;
  return p;
}

}  // namespace

TEST_CASE("forward on the zero network yields zero logits", "[model]") {
  ModelConfig cfg{.cell = CellKind::gru, .hidden = 4, .features = 12, .classes = 2, .seq_len = 7};
  ModelParams p = zero_model(cfg);
  Rng rng(4);
  auto xs = random_sequence(rng, 7, 12);
  ForwardOutput out = forward(p, xs);
  CHECK(out.logits.size() == 2);
  CHECK(out.logits[0] == 0.0);
  CHECK(out.logits[1] == 0.0);
}

TEST_CASE("logits are always two-dimensional", "[model]") {
  ModelConfig cfg;
  ModelParams p = ModelParams::init(cfg, 7);
  Rng rng(5);
  for (std::size_t n : {3u, 4u, 5u, 6u, 7u}) {
    auto xs = random_sequence(rng, n, 12);
    CHECK(forward(p, xs).logits.size() == 2);
  }
  CHECK_THROWS_AS(forward(p, {}), std::invalid_argument);
}

TEST_CASE("full forward matches the composed scalar oracle", "[model]") {
  ModelConfig cfg{.cell = CellKind::gru, .hidden = 4, .features = 12, .classes = 2, .seq_len = 7};
  ModelParams p = ModelParams::init(cfg, 321);
  Rng rng(6);
  auto xs = random_sequence(rng, 7, 12);
  ForwardOutput out = forward(p, xs);

  oracle::RefCell rc;
  rc.k = 12;
  rc.r = 4;
  for (std::size_t g = 0; g < 3; ++g) {
    rc.wx.push_back(p.encoder.w_x[g].values());
    rc.wh.push_back(p.encoder.w_h[g].values());
    rc.b.push_back(p.encoder.b[g].values());
  }
  std::vector<std::vector<double>> raw;
  for (const auto& x : xs) raw.push_back(x.values());
  auto traj = oracle::ref_encode(oracle::RefKind::gru, rc, raw);
  auto attn = oracle::ref_attention(p.attention.w.values(), 4, traj);
  auto logits = oracle::ref_mlp_head(p.head.w1.values(), p.head.b1.values(), p.head.w2.values(),
                                     p.head.b2.values(), 4, 4, attn.context);
  CHECK(out.logits[0] == Catch::Approx(logits[0]).margin(1e-12));
  CHECK(out.logits[1] == Catch::Approx(logits[1]).margin(1e-12));

  // determinism: an identical forward is bit-identical
  ForwardOutput out2 = forward(p, xs);
  CHECK(out2.logits[0] == out.logits[0]);
  CHECK(out2.logits[1] == out.logits[1]);
}

TEST_CASE("predict_label", "[model]") {
  CHECK(predict_label(Tensor::column({0.2, 0.9})) == 1);
  CHECK(predict_label(Tensor::column({0.9, 0.2})) == 0);
  CHECK(predict_label(Tensor::column({0.4, 0.4})) == 0);  // tie -> non-at-risk
}

TEST_CASE("parameter groups form a partition with the expected sizes", "[model]") {
  ModelConfig cfg{.cell = CellKind::gru, .hidden = 4, .features = 12, .classes = 2, .seq_len = 7};
  ModelParams p = ModelParams::init(cfg, 11);
  ParamGroups g = param_groups(p);

  std::size_t enc = 0, att = 0, head = 0;
  for (const auto& t : g.encoder) enc += t.size();
  for (const auto& t : g.attention) att += t.size();
  for (const auto& t : g.head) head += t.size();
  CHECK(enc == 204);  // 3 * (4*12 + 4*4 + 4)
  CHECK(att == 16);
  CHECK(head == 30);  // 4*4+4 + 4*2+2

  std::set<const TensorNode*> seen;
  for (const auto& t : g.all()) CHECK(seen.insert(t.node().get()).second);
  CHECK(seen.size() == g.encoder.size() + g.attention.size() + g.head.size());

  // touching only the encoder group leaves the others bit-identical
  auto att_before = p.attention.w.values();
  auto head_before = p.head.w1.values();
  for (auto& t : g.encoder)
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += 0.5;
  CHECK(p.attention.w.values() == att_before);
  CHECK(p.head.w1.values() == head_before);
}

TEST_CASE("teacher and student shapes agree and truncation is causal", "[model]") {
  ModelConfig teacher_cfg{.cell = CellKind::gru, .hidden = 4, .features = 12, .classes = 2,
                          .seq_len = 7};
  ModelConfig student_cfg = teacher_cfg;
  student_cfg.seq_len = 3;
  CHECK(teacher_cfg.same_shape_as(student_cfg));

  ModelParams t = ModelParams::init(teacher_cfg, 42);
  ModelParams s = ModelParams::init(student_cfg, 43);
  auto gt = param_groups(t), gs = param_groups(s);
  REQUIRE(gt.all().size() == gs.all().size());
  for (std::size_t i = 0; i < gt.all().size(); ++i)
    CHECK(gt.all()[i].size() == gs.all()[i].size());

  // the same parameters on weeks 1..n produce the prefix of the 1..m run
  Rng rng(9);
  auto xs = random_sequence(rng, 7, 12);
  ForwardOutput full = forward(t, xs);
  std::vector<Tensor> first3(xs.begin(), xs.begin() + 3);
  ForwardOutput part = forward(t, first3);
  for (std::size_t w = 0; w < 3; ++w)
    for (std::size_t i = 0; i < 4; ++i) CHECK(part.traj.h[w][i] == full.traj.h[w][i]);
}

TEST_CASE("checkpoint round trip is bit-exact", "[model]") {
  ModelConfig cfg{.cell = CellKind::lstm, .hidden = 6, .features = 12, .classes = 2, .seq_len = 5};
  ModelParams p = ModelParams::init(cfg, 1234);
  // give the values a training-like, non-round texture
  Rng rng(77);
  for (auto& t : param_groups(p).all())
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += rng.normal(0.0, 0.3);

  std::string path = std::string("/tmp/edukd_ckpt_test_") + std::to_string(::getpid()) + ".json";
  save_checkpoint(p, path);
  ModelParams q = load_checkpoint(path);

  CHECK(q.config.cell == cfg.cell);
  CHECK(q.config.hidden == cfg.hidden);
  CHECK(q.config.features == cfg.features);
  CHECK(q.config.classes == cfg.classes);
  CHECK(q.config.seq_len == cfg.seq_len);

  auto gp = param_groups(p).all(), gq = param_groups(q).all();
  REQUIRE(gp.size() == gq.size());
  for (std::size_t i = 0; i < gp.size(); ++i) CHECK(gp[i].values() == gq[i].values());

  std::remove(path.c_str());
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/nowhere.json"), std::runtime_error);
}
