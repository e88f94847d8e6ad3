#pragma once

// Metrics, repeated-run aggregation, cross-validated grid search, and the
// baseline / ablation / teacher experiment harnesses. The at-risk class
// (label 1) is the positive class everywhere; undefined precision or
// recall reports 0 with an explicit flag.

#include <algorithm>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "edukd/distill.hpp"
#include "edukd/features.hpp"
#include "edukd/parallel.hpp"

namespace edukd {

struct ConfusionMatrix {
  long long tp = 0, fp = 0, fn = 0, tn = 0;
  long long total() const { return tp + fp + fn + tn; }
};

inline ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size())
    throw std::invalid_argument("confusion: " + std::to_string(preds.size()) +
                                " predictions for " + std::to_string(labels.size()) + " labels");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] != 0 && preds[i] != 1)
      throw std::invalid_argument("confusion: prediction not in {0,1}");
    if (labels[i] != 0 && labels[i] != 1)
      throw std::invalid_argument("confusion: label not in {0,1}");
    if (labels[i] == 1)
      preds[i] == 1 ? ++cm.tp : ++cm.fn;
    else
      preds[i] == 1 ? ++cm.fp : ++cm.tn;
  }
  return cm;
}

struct MetricsEntry {
  ConfusionMatrix cm;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double weighted_f1 = 0.0;  // class-support-weighted, auxiliary
  bool precision_undefined = false;
  bool recall_undefined = false;
};

namespace detail {

inline double safe_ratio(long long num, long long den, bool& undefined) {
  if (den == 0) {
    undefined = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

inline double f1_of(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace detail

inline MetricsEntry metrics(const ConfusionMatrix& cm) {
  MetricsEntry e;
  e.cm = cm;
  e.precision = detail::safe_ratio(cm.tp, cm.tp + cm.fp, e.precision_undefined);
  e.recall = detail::safe_ratio(cm.tp, cm.tp + cm.fn, e.recall_undefined);
  e.f1 = detail::f1_of(e.precision, e.recall);

  bool ignore = false;
  double p0 = detail::safe_ratio(cm.tn, cm.tn + cm.fn, ignore);
  double r0 = detail::safe_ratio(cm.tn, cm.tn + cm.fp, ignore);
  double f0 = detail::f1_of(p0, r0);
  long long support1 = cm.tp + cm.fn, support0 = cm.tn + cm.fp;
  if (support0 + support1 > 0)
    e.weighted_f1 = (static_cast<double>(support0) * f0 + static_cast<double>(support1) * e.f1) /
                    static_cast<double>(support0 + support1);
  return e;
}

struct MetricsReport {
  std::vector<MetricsEntry> runs;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f1 = 0.0;
  double mean_weighted_f1 = 0.0;

  std::size_t run_count() const { return runs.size(); }
};

inline MetricsReport aggregate(std::vector<MetricsEntry> entries) {
  MetricsReport r;
  r.runs = std::move(entries);
  if (r.runs.empty()) return r;
  for (const auto& e : r.runs) {
    r.mean_precision += e.precision;
    r.mean_recall += e.recall;
    r.mean_f1 += e.f1;
    r.mean_weighted_f1 += e.weighted_f1;
  }
  double n = static_cast<double>(r.runs.size());
  r.mean_precision /= n;
  r.mean_recall /= n;
  r.mean_f1 /= n;
  r.mean_weighted_f1 /= n;
  return r;
}

// Runs the experiment with seeds base_seed .. base_seed+runs-1 and reports
// per-run metrics plus their arithmetic means. Runs are independent and may
// execute concurrently; aggregation is ordered by seed.
inline MetricsReport repeated_runs(const std::function<MetricsEntry(std::uint64_t)>& experiment,
                                   std::size_t runs, std::uint64_t base_seed, unsigned jobs = 1) {
  if (runs < 1) throw std::invalid_argument("repeated_runs: need at least one run");
  std::vector<MetricsEntry> entries(runs);
  parallel_for(runs, jobs, [&](std::size_t i) { entries[i] = experiment(base_seed + i); });
  return aggregate(std::move(entries));
}

// ---- model evaluation -------------------------------------------------

inline MetricsEntry evaluate_model(const ModelParams& params, const Dataset& test,
                                   std::size_t weeks) {
  std::vector<int> preds, labels;
  preds.reserve(test.size());
  for (const auto& seq : test) {
    LabeledSequence in = to_labeled(seq, weeks);
    preds.push_back(predict_label(forward(params, in.inputs).logits));
    labels.push_back(seq.label);
  }
  return metrics(confusion(preds, labels));
}

// ---- grid search ------------------------------------------------------

struct GridPoint {
  CellKind cell = CellKind::gru;
  std::size_t hidden = 4;
  double lr = 0.001;
};

inline std::vector<GridPoint> default_grid() {
  std::vector<GridPoint> grid;
  for (CellKind cell : {CellKind::gru, CellKind::lstm})
    for (std::size_t hidden : {4u, 6u, 8u, 10u})
      for (double lr : {0.01, 0.001}) grid.push_back({cell, hidden, lr});
  return grid;
}

// Round-robin within each class, so fold class ratios stay within one
// student of the dataset's. Deterministic in the dataset order.
inline std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels,
                                                              std::size_t k) {
  if (k < 2) throw std::invalid_argument("stratified_folds: need k >= 2");
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t seen[2] = {0, 0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int c = labels[i] == 1 ? 1 : 0;
    folds[seen[c] % k].push_back(i);
    ++seen[c];
  }
  return folds;
}

using GridEvaluator =
    std::function<double(const GridPoint&, const Dataset& train, const Dataset& val,
                         std::uint64_t seed)>;

struct GridResult {
  GridPoint best;
  double best_score = 0.0;
  std::vector<std::pair<GridPoint, double>> scores;  // grid order
};

// Mean validation score over stratified folds per grid point. Ties prefer
// the smaller hidden size, then the lower learning rate, then GRU.
inline GridResult grid_search(const Dataset& train, const std::vector<GridPoint>& grid,
                              std::size_t folds, const GridEvaluator& evaluate,
                              std::uint64_t seed, unsigned jobs = 1) {
  if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
  std::vector<int> labels;
  for (const auto& s : train) labels.push_back(s.label);
  auto fold_sets = stratified_folds(labels, folds);

  std::vector<double> mean_scores(grid.size(), 0.0);
  std::vector<std::pair<std::size_t, std::size_t>> tasks;  // (grid point, fold)
  for (std::size_t g = 0; g < grid.size(); ++g)
    for (std::size_t f = 0; f < folds; ++f) tasks.emplace_back(g, f);
  std::vector<double> task_scores(tasks.size(), 0.0);

  parallel_for(tasks.size(), jobs, [&](std::size_t t) {
    auto [g, f] = tasks[t];
    Dataset fold_train, fold_val;
    for (std::size_t other = 0; other < folds; ++other) {
      for (std::size_t idx : fold_sets[other])
        (other == f ? fold_val : fold_train).push_back(train[idx]);
    }
    task_scores[t] = evaluate(grid[g], fold_train, fold_val, mix_seed(seed, t));
  });
  for (std::size_t t = 0; t < tasks.size(); ++t)
    mean_scores[tasks[t].first] += task_scores[t] / static_cast<double>(folds);

  GridResult result;
  for (std::size_t g = 0; g < grid.size(); ++g) result.scores.emplace_back(grid[g], mean_scores[g]);
  auto better = [](const std::pair<GridPoint, double>& a, const std::pair<GridPoint, double>& b) {
    if (a.second != b.second) return a.second > b.second;
    if (a.first.hidden != b.first.hidden) return a.first.hidden < b.first.hidden;
    if (a.first.lr != b.first.lr) return a.first.lr < b.first.lr;
    return a.first.cell == CellKind::gru && b.first.cell != CellKind::gru;
  };
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (better(result.scores[g], result.scores[best])) best = g;
  result.best = grid[best];
  result.best_score = mean_scores[best];
  return result;
}

// ---- experiment harnesses -----------------------------------------------

struct Hyper {
  CellKind cell = CellKind::gru;
  std::size_t hidden = 4;
  double lr = 0.01;
  double l2 = 1e-5;
  std::size_t batch = 8;
  std::size_t epochs = 150;
  double lambda = 0.1;
};

enum class BaselineModel { mlp, rnn, gru, lstm, bigru, bilstm, rnn_attention_kd };

inline const std::vector<BaselineModel>& all_baselines() {
  static const std::vector<BaselineModel> models = {
      BaselineModel::mlp,   BaselineModel::rnn,    BaselineModel::gru,
      BaselineModel::lstm,  BaselineModel::bigru,  BaselineModel::bilstm,
      BaselineModel::rnn_attention_kd};
  return models;
}

inline const char* baseline_name(BaselineModel m) {
  switch (m) {
    case BaselineModel::mlp: return "mlp";
    case BaselineModel::rnn: return "rnn";
    case BaselineModel::gru: return "gru";
    case BaselineModel::lstm: return "lstm";
    case BaselineModel::bigru: return "bigru";
    case BaselineModel::bilstm: return "bilstm";
    case BaselineModel::rnn_attention_kd: return "rnn_attention_kd";
  }
  throw std::logic_error("bad baseline");
}

namespace detail {

inline Tensor flatten_weeks(const LabeledSequence& s, std::size_t n) {
  std::vector<double> data;
  data.reserve(n * s.inputs[0].size());
  for (std::size_t w = 0; w < n; ++w)
    data.insert(data.end(), s.inputs[w].values().begin(), s.inputs[w].values().end());
  return Tensor::column(std::move(data));
}

}  // namespace detail

inline TrainConfig train_config_of(const Hyper& h, std::uint64_t seed) {
  return {h.lr, h.l2, h.batch, h.epochs, seed};
}

// Teacher at full length m, then a student distilled down to n weeks with
// all three objectives.
inline ModelParams train_kd_student(const Dataset& train, std::size_t m, std::size_t n,
                                    const Hyper& h, std::uint64_t seed,
                                    const ModelParams* pretrained_teacher = nullptr) {
  ModelConfig cfg{h.cell, h.hidden, kFeatureCount, 2, m};
  TrainSet full = to_train_set(train, m);
  ModelParams teacher = pretrained_teacher
                            ? pretrained_teacher->clone()
                            : train_teacher(full, cfg, train_config_of(h, mix_seed(seed, 101)))
                                  .params;
  DistillConfig dc;
  dc.lambda = h.lambda;
  dc.n = n;
  dc.lr = h.lr;
  dc.l2 = h.l2;
  dc.batch = h.batch;
  dc.epochs = h.epochs;
  dc.seed = mix_seed(seed, 202);
  return distill_student(teacher, full, dc).student;
}

// Trains one baseline column and returns a predictor over test sequences.
inline std::function<int(const StudentSequence&)> train_baseline(
    BaselineModel model, const Dataset& train, std::size_t m, std::size_t n, const Hyper& h,
    std::uint64_t seed) {
  TrainSet data = to_train_set(train, n);
  std::vector<Tensor> targets;
  for (const auto& s : data) targets.push_back(one_hot_label(s.label));
  TrainConfig tc = train_config_of(h, seed);
  Rng init_rng(mix_seed(seed, 0));
  Rng shuffle_rng(mix_seed(seed, 1));
  AdamConfig ac{.lr = h.lr, .weight_decay = h.l2};

  switch (model) {
    case BaselineModel::mlp: {
      // time-independent control: weeks 1..n concatenated into one vector
      auto head = std::make_shared<HeadParams>(
          HeadParams::init(n * kFeatureCount, h.hidden, 2, init_rng));
      std::vector<Tensor> flat;
      for (const auto& s : data) flat.push_back(detail::flatten_weeks(s, n));
      Adam opt(head->tensors(), ac);
      run_epochs(opt, data.size(), tc, shuffle_rng,
                 [&](std::size_t i) { return cross_entropy(head->apply(flat[i]), targets[i]); },
                 "hard");
      std::size_t weeks = n;
      return [head, weeks](const StudentSequence& seq) {
        LabeledSequence in = to_labeled(seq, weeks);
        return predict_label(head->apply(detail::flatten_weeks(in, weeks)));
      };
    }
    case BaselineModel::rnn:
    case BaselineModel::gru:
    case BaselineModel::lstm: {
      CellKind kind = model == BaselineModel::rnn   ? CellKind::vanilla
                      : model == BaselineModel::gru ? CellKind::gru
                                                    : CellKind::lstm;
      auto cell = std::make_shared<CellParams>(
          CellParams::init(kind, kFeatureCount, h.hidden, init_rng));
      auto head = std::make_shared<HeadParams>(HeadParams::init(h.hidden, h.hidden, 2, init_rng));
      std::vector<Tensor> params = cell->tensors();
      for (const auto& t : head->tensors()) params.push_back(t);
      Adam opt(params, ac);
      run_epochs(opt, data.size(), tc, shuffle_rng,
                 [&](std::size_t i) {
                   Tensor last = encode(*cell, data[i].inputs).last();
                   return cross_entropy(head->apply(last), targets[i]);
                 },
                 "hard");
      std::size_t weeks = n;
      return [cell, head, weeks](const StudentSequence& seq) {
        LabeledSequence in = to_labeled(seq, weeks);
        return predict_label(head->apply(encode(*cell, in.inputs).last()));
      };
    }
    case BaselineModel::bigru:
    case BaselineModel::bilstm: {
      CellKind kind = model == BaselineModel::bigru ? CellKind::gru : CellKind::lstm;
      auto fwd = std::make_shared<CellParams>(
          CellParams::init(kind, kFeatureCount, h.hidden, init_rng));
      auto bwd = std::make_shared<CellParams>(
          CellParams::init(kind, kFeatureCount, h.hidden, init_rng));
      auto head = std::make_shared<HeadParams>(
          HeadParams::init(2 * h.hidden, h.hidden, 2, init_rng));
      std::vector<Tensor> params = fwd->tensors();
      for (const auto& t : bwd->tensors()) params.push_back(t);
      for (const auto& t : head->tensors()) params.push_back(t);
      Adam opt(params, ac);
      run_epochs(opt, data.size(), tc, shuffle_rng,
                 [&](std::size_t i) {
                   Tensor both = encode_bidirectional(*fwd, *bwd, data[i].inputs);
                   return cross_entropy(head->apply(both), targets[i]);
                 },
                 "hard");
      std::size_t weeks = n;
      return [fwd, bwd, head, weeks](const StudentSequence& seq) {
        LabeledSequence in = to_labeled(seq, weeks);
        return predict_label(head->apply(encode_bidirectional(*fwd, *bwd, in.inputs)));
      };
    }
    case BaselineModel::rnn_attention_kd: {
      auto student = std::make_shared<ModelParams>(train_kd_student(train, m, n, h, seed));
      std::size_t weeks = n;
      return [student, weeks](const StudentSequence& seq) {
        LabeledSequence in = to_labeled(seq, weeks);
        return predict_label(forward(*student, in.inputs).logits);
      };
    }
  }
  throw std::logic_error("bad baseline");
}

inline MetricsEntry evaluate_predictor(const std::function<int(const StudentSequence&)>& predict,
                                       const Dataset& test) {
  std::vector<int> preds, labels;
  for (const auto& seq : test) {
    preds.push_back(predict(seq));
    labels.push_back(seq.label);
  }
  return metrics(confusion(preds, labels));
}

struct SuiteRow {
  std::string name;  // model or loss-subset configuration
  std::size_t weeks = 0;
  MetricsReport report;
};

struct SuiteResult {
  std::string split;
  std::size_t runs = 0;
  std::uint64_t base_seed = 0;
  std::vector<SuiteRow> rows;
};

// Every baseline consumes only weeks 1..n; the KD column's teacher always
// sees the full m weeks. One teacher per run feeds all of that run's
// KD students.
inline SuiteResult baseline_suite(const std::string& split_name, const Dataset& train,
                                  const Dataset& test, std::size_t m,
                                  const std::vector<std::size_t>& week_ranges, std::size_t runs,
                                  std::uint64_t base_seed, const Hyper& h, unsigned jobs = 1) {
  const auto& models = all_baselines();
  std::vector<std::vector<MetricsEntry>> cells(models.size() * week_ranges.size(),
                                               std::vector<MetricsEntry>(runs));
  parallel_for(runs, jobs, [&](std::size_t run) {
    std::uint64_t run_seed = base_seed + run;
    ModelConfig cfg{h.cell, h.hidden, kFeatureCount, 2, m};
    ModelParams teacher =
        train_teacher(to_train_set(train, m), cfg, train_config_of(h, mix_seed(run_seed, 101)))
            .params;
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      for (std::size_t wi = 0; wi < week_ranges.size(); ++wi) {
        std::size_t n = week_ranges[wi];
        std::uint64_t seed = mix_seed(run_seed, mi * 131 + n);
        MetricsEntry entry;
        if (models[mi] == BaselineModel::rnn_attention_kd) {
          ModelParams student = train_kd_student(train, m, n, h, seed, &teacher);
          entry = evaluate_model(student, test, n);
        } else {
          entry = evaluate_predictor(train_baseline(models[mi], train, m, n, h, seed), test);
        }
        cells[mi * week_ranges.size() + wi][run] = entry;
      }
    }
  });

  SuiteResult result{split_name, runs, base_seed, {}};
  for (std::size_t mi = 0; mi < models.size(); ++mi)
    for (std::size_t wi = 0; wi < week_ranges.size(); ++wi)
      result.rows.push_back({baseline_name(models[mi]), week_ranges[wi],
                             aggregate(std::move(cells[mi * week_ranges.size() + wi]))});
  return result;
}

// The seven loss-subset configurations over the week ranges. The teacher is
// shared within a run; soft-target bookkeeping stays inside distill_student.
inline SuiteResult ablation_suite(const std::string& split_name, const Dataset& train,
                                  const Dataset& test, std::size_t m,
                                  const std::vector<std::size_t>& week_ranges, std::size_t runs,
                                  std::uint64_t base_seed, const Hyper& h, unsigned jobs = 1) {
  DistillConfig base;
  base.lambda = h.lambda;
  base.lr = h.lr;
  base.l2 = h.l2;
  base.batch = h.batch;
  base.epochs = h.epochs;
  auto variants = ablation_variants(base);

  std::vector<std::vector<MetricsEntry>> cells(variants.size() * week_ranges.size(),
                                               std::vector<MetricsEntry>(runs));
  parallel_for(runs, jobs, [&](std::size_t run) {
    std::uint64_t run_seed = base_seed + run;
    ModelConfig cfg{h.cell, h.hidden, kFeatureCount, 2, m};
    TrainSet full = to_train_set(train, m);
    ModelParams teacher =
        train_teacher(full, cfg, train_config_of(h, mix_seed(run_seed, 101))).params;
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
      for (std::size_t wi = 0; wi < week_ranges.size(); ++wi) {
        DistillConfig dc = variants[vi];
        dc.n = week_ranges[wi];
        dc.seed = mix_seed(run_seed, vi * 131 + dc.n);
        ModelParams student = distill_student(teacher, full, dc).student;
        cells[vi * week_ranges.size() + wi][run] = evaluate_model(student, test, dc.n);
      }
    }
  });

  SuiteResult result{split_name, runs, base_seed, {}};
  for (std::size_t vi = 0; vi < variants.size(); ++vi)
    for (std::size_t wi = 0; wi < week_ranges.size(); ++wi)
      result.rows.push_back({variant_name(variants[vi]), week_ranges[wi],
                             aggregate(std::move(cells[vi * week_ranges.size() + wi]))});
  return result;
}

// Full-length teacher metrics, one row per split.
inline SuiteResult teacher_report(
    const std::vector<std::pair<std::string, std::pair<Dataset, Dataset>>>& splits, std::size_t m,
    std::uint64_t base_seed, const Hyper& h, unsigned jobs = 1) {
  SuiteResult result{"teachers", 1, base_seed, {}};
  result.rows.resize(splits.size());
  parallel_for(splits.size(), jobs, [&](std::size_t i) {
    const auto& [name, data] = splits[i];
    ModelConfig cfg{h.cell, h.hidden, kFeatureCount, 2, m};
    ModelParams teacher =
        train_teacher(to_train_set(data.first, m), cfg, train_config_of(h, mix_seed(base_seed, i)))
            .params;
    result.rows[i] = {name, m, aggregate({evaluate_model(teacher, data.second, m)})};
  });
  return result;
}

// ---- report files -------------------------------------------------------

inline void write_suite_csv(const SuiteResult& suite, const std::string& path,
                            const std::vector<std::string>& metadata) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  for (const auto& line : metadata) out << "# " << line << "\n";
  out << "split,weeks,model,precision,recall,f1,weighted_f1,runs\n";
  for (const auto& row : suite.rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,1-%zu,%s,%.4f,%.4f,%.4f,%.4f,%zu", suite.split.c_str(),
                  row.weeks, row.name.c_str(), row.report.mean_precision, row.report.mean_recall,
                  row.report.mean_f1, row.report.mean_weighted_f1, row.report.run_count());
    out << buf << "\n";
  }
}

inline std::string suite_text_table(const SuiteResult& suite) {
  std::ostringstream out;
  out << "split " << suite.split << " (" << suite.runs << " runs, base seed " << suite.base_seed
      << ")\n";
  out << std::left << std::setw(20) << "model" << std::setw(8) << "weeks" << std::right
      << std::setw(8) << "PR" << std::setw(8) << "RE" << std::setw(8) << "F1" << std::setw(8)
      << "wF1" << "\n";
  for (const auto& row : suite.rows) {
    out << std::left << std::setw(20) << row.name << std::setw(8)
        << ("1-" + std::to_string(row.weeks)) << std::right << std::fixed << std::setprecision(2)
        << std::setw(8) << row.report.mean_precision << std::setw(8) << row.report.mean_recall
        << std::setw(8) << row.report.mean_f1 << std::setw(8) << row.report.mean_weighted_f1
        << "\n";
  }
  return out.str();
}

}  // namespace edukd
