#pragma once

// Dot-product attention over a hidden trajectory, keyed on the final
// available state: e_i = h_nᵀ W h_i, α = softmax(e), C = Σ α_i h_i.
// The final step scores itself and is included in the softmax.

#include <stdexcept>
#include <vector>

#include "edukd/cells.hpp"
#include "edukd/rng.hpp"
#include "edukd/tensor.hpp"

namespace edukd {

struct AttentionParams {
  Tensor w;  // r x r, trainable

  static AttentionParams init(std::size_t r, Rng& rng) {
    double lim = xavier_limit(r, r);
    std::vector<double> data(r * r);
    for (auto& v : data) v = rng.uniform(-lim, lim);
    return {Tensor::from_data(r, r, std::move(data), true)};
  }

  AttentionParams clone() const { return {w.clone()}; }
};

struct AttentionOutput {
  Tensor scores;   // e_1..e_n
  Tensor weights;  // α_1..α_n
  Tensor context;  // C, r x 1
};

// Unscaled bilinear scores against the last state of the trajectory.
inline Tensor alignment_scores(const HiddenTrajectory& traj, const AttentionParams& attn) {
  if (traj.length() == 0) throw std::invalid_argument("alignment_scores: empty trajectory");
  std::size_t r = traj.h.front().rows();
  if (attn.w.rows() != r || attn.w.cols() != r)
    throw std::invalid_argument("alignment_scores: W is " + std::to_string(attn.w.rows()) + "x" +
                                std::to_string(attn.w.cols()) + ", hidden size is " +
                                std::to_string(r));
  Tensor key_row = matmul(transpose(traj.last()), attn.w);  // 1 x r
  std::vector<Tensor> scores;
  scores.reserve(traj.length());
  for (const auto& h : traj.h) scores.push_back(matmul(key_row, h));
  return stack_scalars(scores);
}

inline Tensor attention_weights(const Tensor& scores) { return stable_softmax(scores); }

inline Tensor context_vector(const Tensor& weights, const HiddenTrajectory& traj) {
  if (weights.size() != traj.length())
    throw std::invalid_argument("context_vector: " + std::to_string(weights.size()) +
                                " weights for " + std::to_string(traj.length()) + " states");
  Tensor c = smul(index(weights, 0), traj.h[0]);
  for (std::size_t i = 1; i < traj.length(); ++i)
    c = add(c, smul(index(weights, i), traj.h[i]));
  return c;
}

inline AttentionOutput attend(const HiddenTrajectory& traj, const AttentionParams& attn) {
  AttentionOutput out;
  out.scores = alignment_scores(traj, attn);
  out.weights = attention_weights(out.scores);
  out.context = context_vector(out.weights, traj);
  return out;
}

}  // namespace edukd
