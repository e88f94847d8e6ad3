#pragma once

// Teacher pretraining and the three-phase distillation loop.
//
// Per epoch the student makes three passes over the shuffled batches:
//   1. hint loss (teacher final hidden vs student final hidden), encoder
//      group only;
//   2. context-vector loss, attention group only;
//   3. hard cross-entropy to ground truth plus an optional λ-weighted soft
//      cross-entropy to the teacher's output distribution, all groups.
// The teacher is frozen throughout; its outputs on the full-length
// sequences are constants and are computed once per run.

#include <cstdint>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "edukd/model.hpp"
#include "edukd/optim.hpp"
#include "edukd/rng.hpp"
#include "edukd/tensor.hpp"

namespace edukd {

struct TrainConfig {
  double lr = 0.001;
  double l2 = 1e-5;
  std::size_t batch = 8;
  std::size_t epochs = 150;
  std::uint64_t seed = 0;
};

struct DistillConfig {
  double lambda = 0.1;
  bool use_hint = true;
  bool use_context = true;
  bool use_soft = true;
  // Diagnostic switch for isolating phases 1-2; the output phase (hard
  // cross-entropy, plus the soft term when use_soft) is otherwise always on
  // and stays on in every ablation variant.
  bool use_output_phase = true;
  std::size_t n = 3;  // student truncation length in weeks
  double lr = 0.001;
  double l2 = 1e-5;
  std::size_t batch = 8;
  std::size_t epochs = 150;
  std::uint64_t seed = 0;

  void validate() const {
    if (lambda < 0.0) throw std::invalid_argument("DistillConfig: lambda must be >= 0");
    if (n < 1) throw std::invalid_argument("DistillConfig: student length must be >= 1");
    if (lr <= 0.0) throw std::invalid_argument("DistillConfig: learning rate must be positive");
    if (batch < 1) throw std::invalid_argument("DistillConfig: batch must be >= 1");
  }

  TrainConfig train_config() const { return {lr, l2, batch, epochs, seed}; }
};

// Short name for a loss-subset configuration, e.g. "cv+hd+soft".
inline std::string variant_name(const DistillConfig& c) {
  std::string name;
  auto append = [&](const char* part) {
    if (!name.empty()) name += "+";
    name += part;
  };
  if (c.use_context) append("cv");
  if (c.use_hint) append("hd");
  if (c.use_soft) append("soft");
  return name.empty() ? "none" : name;
}

// The seven loss-subset configurations of the ablation study; the hard
// cross-entropy term in phase 3 is always present.
inline std::vector<DistillConfig> ablation_variants(const DistillConfig& base) {
  struct Flags {
    bool hint, context, soft;
  };
  const Flags table[] = {
      {true, true, true},    // cv+hd+soft
      {false, true, true},   // cv+soft
      {true, false, true},   // hd+soft
      {true, true, false},   // cv+hd
      {false, true, false},  // cv
      {true, false, false},  // hd
      {false, false, true},  // soft
  };
  std::vector<DistillConfig> out;
  for (const auto& f : table) {
    DistillConfig c = base;
    c.use_hint = f.hint;
    c.use_context = f.context;
    c.use_soft = f.soft;
    out.push_back(c);
  }
  return out;
}

// ---- losses ---------------------------------------------------------------

inline Tensor hint_loss_states(const Tensor& teacher_h, const Tensor& student_h) {
  if (teacher_h.size() != student_h.size())
    throw std::invalid_argument("hint_loss: hidden sizes differ: " +
                                std::to_string(teacher_h.size()) + " vs " +
                                std::to_string(student_h.size()));
  return mse(teacher_h, student_h);
}

inline Tensor context_loss_vectors(const Tensor& teacher_c, const Tensor& student_c) {
  if (teacher_c.size() != student_c.size())
    throw std::invalid_argument("context_loss: context sizes differ: " +
                                std::to_string(teacher_c.size()) + " vs " +
                                std::to_string(student_c.size()));
  return mse(teacher_c, student_c);
}

// MSE between the final hidden states only.
inline Tensor hint_loss(const ForwardOutput& teacher, const ForwardOutput& student) {
  return hint_loss_states(teacher.final_hidden(), student.final_hidden());
}

inline Tensor context_loss(const ForwardOutput& teacher, const ForwardOutput& student) {
  return context_loss_vectors(teacher.context(), student.context());
}

// Teacher logits pass through softmax at temperature 1 and are treated as
// constants; no gradient reaches the teacher.
inline Tensor soft_target_of(const Tensor& teacher_logits) {
  Tensor detached = teacher_logits.clone();
  detached.set_requires_grad(false);
  return stable_softmax(detached);
}

inline Tensor distillation_loss(const Tensor& y_true, const Tensor& student_logits,
                                const Tensor& teacher_logits, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("distillation_loss: lambda must be >= 0");
  Tensor hard = cross_entropy(student_logits, y_true);
  if (lambda == 0.0) return hard;
  Tensor soft = cross_entropy(student_logits, soft_target_of(teacher_logits));
  return add(hard, scale(soft, lambda));
}

// ---- training -------------------------------------------------------------

struct LabeledSequence {
  std::string id;
  std::vector<Tensor> inputs;  // one k-vector per week
  int label = 0;               // 1 = at-risk
};

using TrainSet = std::vector<LabeledSequence>;

inline Tensor one_hot_label(int label) {
  return label == 1 ? Tensor::column({0.0, 1.0}) : Tensor::column({1.0, 0.0});
}

struct TraceRow {
  std::size_t epoch = 0;
  std::string phase;
  double loss = 0.0;
};

struct LossCallCounts {
  std::size_t hint = 0;
  std::size_t context = 0;
  std::size_t soft = 0;
  std::size_t hard = 0;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch,
                                                           Rng& rng) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch) {
    std::size_t end = std::min(count, start + batch);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

inline void check_finite_loss(double loss, const char* phase, std::size_t epoch) {
  if (!std::isfinite(loss))
    throw std::runtime_error(std::string("training diverged: non-finite ") + phase +
                             " loss at epoch " + std::to_string(epoch + 1));
}

}  // namespace detail

// Minimize the mean of per-sample losses over seeded mini-batches with one
// Adam instance; returns the per-epoch mean loss.
inline std::vector<double> run_epochs(
    Adam& opt, std::size_t count, const TrainConfig& tc, Rng& shuffle_rng,
    const std::function<Tensor(std::size_t)>& sample_loss, const char* phase_name) {
  std::vector<double> epoch_losses;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    auto batches = detail::epoch_batches(count, tc.batch, shuffle_rng);
    double total = 0.0;
    for (const auto& batch : batches) {
      Tape tape;
      Tensor sum = sample_loss(batch[0]);
      for (std::size_t i = 1; i < batch.size(); ++i) sum = add(sum, sample_loss(batch[i]));
      Tensor loss = scale(sum, 1.0 / static_cast<double>(batch.size()));
      opt.zero_grad();
      tape.backward(loss);
      opt.step();
      total += loss.item() * static_cast<double>(batch.size());
    }
    double mean = total / static_cast<double>(count);
    detail::check_finite_loss(mean, phase_name, epoch);
    epoch_losses.push_back(mean);
  }
  return epoch_losses;
}

struct TeacherResult {
  ModelParams params;
  std::vector<TraceRow> trace;
};

// Hard cross-entropy + L2 on full-length sequences.
inline TeacherResult train_teacher(const TrainSet& data, const ModelConfig& cfg,
                                   const TrainConfig& tc) {
  if (data.empty()) throw std::invalid_argument("train_teacher: empty dataset");
  for (const auto& s : data)
    if (s.inputs.size() != cfg.seq_len)
      throw std::invalid_argument("train_teacher: sequence for " + s.id + " has " +
                                  std::to_string(s.inputs.size()) + " weeks, expected " +
                                  std::to_string(cfg.seq_len));
  bool has0 = false, has1 = false;
  for (const auto& s : data) (s.label == 1 ? has1 : has0) = true;
  if (!has0 || !has1)
    std::cerr << "warning: training set contains a single class; proceeding\n";

  TeacherResult result;
  result.params = ModelParams::init(cfg, mix_seed(tc.seed, 0));
  Rng shuffle_rng(mix_seed(tc.seed, 1));
  Adam opt(param_groups(result.params).all(),
           AdamConfig{.lr = tc.lr, .weight_decay = tc.l2});

  std::vector<Tensor> targets;
  targets.reserve(data.size());
  for (const auto& s : data) targets.push_back(one_hot_label(s.label));

  auto sample_loss = [&](std::size_t i) {
    ForwardOutput out = forward(result.params, data[i].inputs);
    return cross_entropy(out.logits, targets[i]);
  };
  auto losses = run_epochs(opt, data.size(), tc, shuffle_rng, sample_loss, "hard");
  for (std::size_t e = 0; e < losses.size(); ++e)
    result.trace.push_back({e + 1, "hard", losses[e]});
  return result;
}

struct TrainedPair {
  ModelParams teacher;
  ModelParams student;
  std::vector<TraceRow> trace;
  LossCallCounts counts;
};

// The staged distillation loop. `full_data` holds the same students the
// teacher saw, at full length m; the student consumes weeks 1..n of them.
inline TrainedPair distill_student(const ModelParams& teacher, const TrainSet& full_data,
                                   const DistillConfig& dc) {
  dc.validate();
  std::size_t m = teacher.config.seq_len;
  if (dc.n > m)
    throw std::invalid_argument("distill_student: student length " + std::to_string(dc.n) +
                                " exceeds teacher length " + std::to_string(m));
  if (full_data.empty()) throw std::invalid_argument("distill_student: empty dataset");
  for (const auto& s : full_data)
    if (s.inputs.size() != m)
      throw std::invalid_argument("distill_student: sequence for " + s.id + " has " +
                                  std::to_string(s.inputs.size()) + " weeks, teacher expects " +
                                  std::to_string(m));

  TrainedPair pair;
  pair.teacher = teacher.clone();
  ModelConfig scfg = teacher.config;
  scfg.seq_len = dc.n;
  pair.student = ModelParams::init(scfg, mix_seed(dc.seed, 0));
  Rng shuffle_rng(mix_seed(dc.seed, 1));

  // Frozen teacher: forward every student once, outside any tape.
  std::size_t count = full_data.size();
  std::vector<Tensor> teacher_h(count), teacher_c(count), soft_targets(count), targets(count);
  std::vector<std::vector<Tensor>> trunc(count);
  for (std::size_t i = 0; i < count; ++i) {
    ForwardOutput out = forward(teacher, full_data[i].inputs);
    teacher_h[i] = out.final_hidden();
    teacher_c[i] = out.context();
    if (dc.use_soft) soft_targets[i] = soft_target_of(out.logits);
    targets[i] = one_hot_label(full_data[i].label);
    trunc[i].assign(full_data[i].inputs.begin(),
                    full_data[i].inputs.begin() + static_cast<std::ptrdiff_t>(dc.n));
  }

  ParamGroups groups = param_groups(pair.student);
  AdamConfig base{.lr = dc.lr, .weight_decay = dc.l2};
  // separate optimizer state per phase
  Adam opt_hint(groups.encoder, base);
  Adam opt_context(groups.attention, base);
  Adam opt_output(groups.all(), base);

  TrainConfig tc = dc.train_config();
  for (std::size_t epoch = 0; epoch < dc.epochs; ++epoch) {
    auto batches = detail::epoch_batches(count, dc.batch, shuffle_rng);
    auto run_phase = [&](Adam& opt, const char* name,
                         const std::function<Tensor(std::size_t)>& sample_loss) {
      double total = 0.0;
      for (const auto& batch : batches) {
        Tape tape;
        Tensor sum = sample_loss(batch[0]);
        for (std::size_t i = 1; i < batch.size(); ++i) sum = add(sum, sample_loss(batch[i]));
        Tensor loss = scale(sum, 1.0 / static_cast<double>(batch.size()));
        opt.zero_grad();
        tape.backward(loss);
        opt.step();
        total += loss.item() * static_cast<double>(batch.size());
      }
      double mean = total / static_cast<double>(count);
      detail::check_finite_loss(mean, name, epoch);
      pair.trace.push_back({epoch + 1, name, mean});
    };

    if (dc.use_hint) {
      run_phase(opt_hint, "hint", [&](std::size_t i) {
        HiddenTrajectory traj = encode(pair.student.encoder, trunc[i]);
        ++pair.counts.hint;
        return hint_loss_states(teacher_h[i], traj.last());
      });
    }
    if (dc.use_context) {
      run_phase(opt_context, "context", [&](std::size_t i) {
        HiddenTrajectory traj = encode(pair.student.encoder, trunc[i]);
        AttentionOutput attn = attend(traj, pair.student.attention);
        ++pair.counts.context;
        return context_loss_vectors(teacher_c[i], attn.context);
      });
    }
    if (dc.use_output_phase) {
      run_phase(opt_output, "distill", [&](std::size_t i) {
        ForwardOutput out = forward(pair.student, trunc[i]);
        ++pair.counts.hard;
        Tensor hard = cross_entropy(out.logits, targets[i]);
        if (!dc.use_soft || dc.lambda == 0.0) return hard;
        ++pair.counts.soft;
        Tensor soft = cross_entropy(out.logits, soft_targets[i]);
        return add(hard, scale(soft, dc.lambda));
      });
    }
  }
  return pair;
}

inline void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace: " + path);
  out << "epoch,phase,loss\n";
  char buf[64];
  for (const auto& row : trace) {
    std::snprintf(buf, sizeof(buf), "%.17g", row.loss);
    out << row.epoch << "," << row.phase << "," << buf << "\n";
  }
}

}  // namespace edukd
