#pragma once

// The attention-augmented recurrent classifier: encoder -> attention ->
// MLP head. Teacher and student share this architecture and differ only
// in the sequence length they consume. Parameters live in three disjoint
// groups so the distillation phases can update them independently.

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "edukd/attention.hpp"
#include "edukd/cells.hpp"
#include "edukd/rng.hpp"
#include "edukd/tensor.hpp"

namespace edukd {

struct ModelConfig {
  CellKind cell = CellKind::gru;
  std::size_t hidden = 4;     // r
  std::size_t features = 12;  // k
  std::size_t classes = 2;
  std::size_t seq_len = 7;    // m for the teacher, n for a student

  bool same_shape_as(const ModelConfig& o) const {
    return cell == o.cell && hidden == o.hidden && features == o.features && classes == o.classes;
  }
};

// One hidden layer with tanh, matching the encoder's bounded regime, then
// a linear layer to raw logits. No softmax here; losses normalize.
struct HeadParams {
  Tensor w1, b1;  // hidden x in
  Tensor w2, b2;  // classes x hidden

  static HeadParams init(std::size_t in_dim, std::size_t hidden, std::size_t classes, Rng& rng) {
    HeadParams h;
    double l1 = xavier_limit(in_dim, hidden);
    double l2 = xavier_limit(hidden, classes);
    std::vector<double> w1(hidden * in_dim), w2(classes * hidden);
    for (auto& v : w1) v = rng.uniform(-l1, l1);
    for (auto& v : w2) v = rng.uniform(-l2, l2);
    h.w1 = Tensor::from_data(hidden, in_dim, std::move(w1), true);
    h.b1 = Tensor::zeros(hidden, 1, true);
    h.w2 = Tensor::from_data(classes, hidden, std::move(w2), true);
    h.b2 = Tensor::zeros(classes, 1, true);
    return h;
  }

  Tensor apply(const Tensor& in) const {
    Tensor mid = edukd::tanh(add(matmul(w1, in), b1));
    return add(matmul(w2, mid), b2);
  }

  std::vector<Tensor> tensors() const { return {w1, b1, w2, b2}; }

  HeadParams clone() const { return {w1.clone(), b1.clone(), w2.clone(), b2.clone()}; }
};

struct ModelParams {
  ModelConfig config;
  CellParams encoder;
  AttentionParams attention;
  HeadParams head;

  // Draw order: encoder gates, attention W, head. Same seed, same model.
  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    ModelParams p;
    p.config = cfg;
    p.encoder = CellParams::init(cfg.cell, cfg.features, cfg.hidden, rng);
    p.attention = AttentionParams::init(cfg.hidden, rng);
    p.head = HeadParams::init(cfg.hidden, cfg.hidden, cfg.classes, rng);
    return p;
  }

  ModelParams clone() const {
    ModelParams p;
    p.config = config;
    p.encoder = encoder.clone();
    p.attention = attention.clone();
    p.head = head.clone();
    return p;
  }
};

// Disjoint, exhaustive partition of the trainables.
struct ParamGroups {
  std::vector<Tensor> encoder;
  std::vector<Tensor> attention;
  std::vector<Tensor> head;

  std::vector<Tensor> all() const {
    std::vector<Tensor> out = encoder;
    out.insert(out.end(), attention.begin(), attention.end());
    out.insert(out.end(), head.begin(), head.end());
    return out;
  }
};

inline ParamGroups param_groups(const ModelParams& p) {
  return {p.encoder.tensors(), {p.attention.w}, p.head.tensors()};
}

struct ForwardOutput {
  HiddenTrajectory traj;
  AttentionOutput attn;
  Tensor logits;

  const Tensor& final_hidden() const { return traj.last(); }
  const Tensor& context() const { return attn.context; }
};

inline ForwardOutput forward(const ModelParams& p, const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("forward: empty sequence");
  ForwardOutput out;
  out.traj = encode(p.encoder, xs);
  out.attn = attend(out.traj, p.attention);
  out.logits = p.head.apply(out.attn.context);
  return out;
}

// Argmax over the two logits; index 1 is the at-risk class. An exact tie
// predicts 0.
inline int predict_label(const Tensor& logits) {
  return logits[1] > logits[0] ? 1 : 0;
}

// ---- checkpoint io ------------------------------------------------------
// Flat named arrays plus the config header; doubles survive the JSON
// round trip bit-exactly.

namespace detail {

inline nlohmann::json tensor_to_json(const Tensor& t) {
  return {{"rows", t.rows()}, {"cols", t.cols()}, {"data", t.values()}};
}

inline Tensor tensor_from_json(const nlohmann::json& j, bool requires_grad) {
  std::vector<double> data = j.at("data").get<std::vector<double>>();
  return Tensor::from_data(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                           std::move(data), requires_grad);
}

}  // namespace detail

inline nlohmann::json checkpoint_json(const ModelParams& p) {
  nlohmann::json params;
  for (std::size_t g = 0; g < p.encoder.w_x.size(); ++g) {
    std::string suffix = "." + std::to_string(g);
    params["encoder.w_x" + suffix] = detail::tensor_to_json(p.encoder.w_x[g]);
    params["encoder.w_h" + suffix] = detail::tensor_to_json(p.encoder.w_h[g]);
    params["encoder.b" + suffix] = detail::tensor_to_json(p.encoder.b[g]);
  }
  params["attention.w"] = detail::tensor_to_json(p.attention.w);
  params["head.w1"] = detail::tensor_to_json(p.head.w1);
  params["head.b1"] = detail::tensor_to_json(p.head.b1);
  params["head.w2"] = detail::tensor_to_json(p.head.w2);
  params["head.b2"] = detail::tensor_to_json(p.head.b2);
  return {{"format", "edukd-checkpoint"},
          {"version", 1},
          {"config",
           {{"cell", cell_name(p.config.cell)},
            {"hidden", p.config.hidden},
            {"features", p.config.features},
            {"classes", p.config.classes},
            {"seq_len", p.config.seq_len}}},
          {"params", params}};
}

inline void save_checkpoint(const ModelParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << checkpoint_json(p).dump(1) << "\n";
}

inline ModelParams checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "edukd-checkpoint")
    throw std::runtime_error("not an edukd checkpoint");
  const auto& jc = j.at("config");
  ModelConfig cfg;
  cfg.cell = cell_from_name(jc.at("cell").get<std::string>());
  cfg.hidden = jc.at("hidden").get<std::size_t>();
  cfg.features = jc.at("features").get<std::size_t>();
  cfg.classes = jc.at("classes").get<std::size_t>();
  cfg.seq_len = jc.at("seq_len").get<std::size_t>();

  ModelParams p;
  p.config = cfg;
  p.encoder.kind = cfg.cell;
  p.encoder.input_size = cfg.features;
  p.encoder.hidden_size = cfg.hidden;
  const auto& params = j.at("params");
  for (std::size_t g = 0; g < gate_count(cfg.cell); ++g) {
    std::string suffix = "." + std::to_string(g);
    p.encoder.w_x.push_back(detail::tensor_from_json(params.at("encoder.w_x" + suffix), true));
    p.encoder.w_h.push_back(detail::tensor_from_json(params.at("encoder.w_h" + suffix), true));
    p.encoder.b.push_back(detail::tensor_from_json(params.at("encoder.b" + suffix), true));
  }
  p.attention.w = detail::tensor_from_json(params.at("attention.w"), true);
  p.head.w1 = detail::tensor_from_json(params.at("head.w1"), true);
  p.head.b1 = detail::tensor_from_json(params.at("head.b1"), true);
  p.head.w2 = detail::tensor_from_json(params.at("head.w2"), true);
  p.head.b2 = detail::tensor_from_json(params.at("head.b2"), true);
  return p;
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  return checkpoint_from_json(j);
}

}  // namespace edukd
