#pragma once

// Losses, Adam, the chronological training loop and evaluation metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gatagnn/autodiff.hpp"
#include "gatagnn/data.hpp"
#include "gatagnn/errors.hpp"
#include "gatagnn/model.hpp"

namespace gatagnn {

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Regression: MSE of an N×1 output. Classification: mean cross-entropy of
/// N×2 probabilities against class labels.
inline Var loss(Var output, const WindowSample& s, Task task) {
  Tape& t = *output.tape;
  if (s.n_companies() == 0) throw ContractError("loss: empty batch");
  if (task == Task::regression) return mse_loss(output, t.constant(Tensor::column(s.target_return)));
  return cross_entropy(output, s.target_class);
}

/// Plain regression loss on vectors.
inline double mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw DimensionError("mse: length mismatch");
  if (pred.empty()) throw ContractError("mse: empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

/// Plain mean cross-entropy for rows of class probabilities.
inline double cross_entropy(const Tensor& probs, std::span<const std::size_t> labels) {
  Tape t;
  return cross_entropy(t.constant(probs), labels).value()[0];
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One bias-corrected Adam update of every parameter from its gradient.
inline void adam_step(std::span<Parameter* const> params, AdamState& state, double lr) {
  for (const Parameter* p : params) {
    if (!p->grad.same_shape(p->value)) throw ContractError("adam_step: gradient of " + p->name + " not populated");
    if (!p->grad.all_finite()) throw NumericError("non-finite gradient in parameter " + p->name);
  }
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.rows(), p->value.cols());
      state.v.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: parameter set changed");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.epsilon);
    }
  }
}

/// Rescales all gradients so their joint L2 norm is at most max_norm.
inline void clip_gradients(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const double k = max_norm / norm;
  for (Parameter* p : params)
    for (double& g : p->grad.data()) g *= k;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Mann-Whitney AUC of scores against binary labels (ties count ½). Absent
/// when only one class is present.
inline std::optional<double> auc(std::span<const double> scores, std::span<const std::size_t> labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks (1-based) over tie groups.
  std::vector<double> rank(scores.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  double pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1) {
      pos += 1;
      rank_sum += rank[i];
    }
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

inline double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  if (predicted.size() != labels.size() || predicted.empty()) throw DimensionError("accuracy: bad lengths");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

/// ACC/AUC/MSE/MAE for one model on one split. Classification models report
/// ACC and AUC from class probabilities. Regression models report MSE/MAE and
/// also ACC/AUC from the sign and rank of the predicted return.
struct MetricsReport {
  std::string split;
  std::size_t n_samples = 0;  // pooled (day, company) predictions
  std::optional<double> acc;
  std::optional<double> auc;
  std::optional<double> mse;
  std::optional<double> mae;
};

/// Pooled predictions over a split, restricted to `companies` when non-empty.
struct PooledPredictions {
  std::vector<double> score;  // regression output or class-1 probability
  std::vector<double> target_return;
  std::vector<std::size_t> predicted_class;
  std::vector<std::size_t> label;
};

inline PooledPredictions predict_split(const ForecastModel& m, std::span<const WindowSample> split,
                                       std::span<const std::size_t> companies = {}) {
  PooledPredictions out;
  for (const auto& s : split) {
    const PredictionBatch b = forward(m, s);
    auto take = [&](std::size_t i) {
      const double sc = b.score(i);
      out.score.push_back(sc);
      out.target_return.push_back(s.target_return[i]);
      out.label.push_back(s.target_class[i]);
      if (m.config.task == Task::classification) out.predicted_class.push_back(b.output(i, 1) > b.output(i, 0) ? 1 : 0);
      else out.predicted_class.push_back(sc > 0.0 ? 1 : 0);
    };
    if (companies.empty())
      for (std::size_t i = 0; i < s.n_companies(); ++i) take(i);
    else
      for (std::size_t i : companies) take(i);
  }
  return out;
}

inline MetricsReport evaluate(const ForecastModel& m, std::span<const WindowSample> split, std::string label = "test",
                              std::span<const std::size_t> companies = {}) {
  if (split.empty()) throw ContractError("evaluate: empty split");
  const auto p = predict_split(m, split, companies);
  MetricsReport r;
  r.split = std::move(label);
  r.n_samples = p.score.size();
  r.acc = accuracy(p.predicted_class, p.label);
  r.auc = auc(p.score, p.label);
  if (m.config.task == Task::regression) {
    double se = 0, ae = 0;
    for (std::size_t i = 0; i < p.score.size(); ++i) {
      const double e = p.score[i] - p.target_return[i];
      se += e * e;
      ae += std::abs(e);
    }
    r.mse = se / static_cast<double>(p.score.size());
    r.mae = ae / static_cast<double>(p.score.size());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 50;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  std::optional<double> gradient_clip;
  /// Stop as soon as the epoch's validation loss falls to this value.
  std::optional<double> target_loss;
};

inline void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (c.patience > c.epochs) throw ConfigError("patience must not exceed epochs");
  if (c.gradient_clip && !(*c.gradient_clip > 0)) throw ConfigError("gradient_clip must be > 0");
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;  // mean per-step loss seen while training
  double val_loss = 0;
};

struct TrainResult {
  ForecastModel model;  // best-validation parameters
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
};

/// Mean loss over a split without touching the parameters.
inline double split_loss(const ForecastModel& m, std::span<const WindowSample> split) {
  if (split.empty()) throw ContractError("split_loss: empty split");
  Tape t;
  auto& mm = const_cast<ForecastModel&>(m);  // constants only
  double total = 0.0;
  for (const auto& s : split) {
    t.clear();
    const ForwardGraph g = forward_graph(t, mm, s, {.trainable = false});
    total += loss(g.output, s, m.config.task).value()[0];
  }
  return total / static_cast<double>(split.size());
}

/// One Adam step per sample in chronological order, early stopping on
/// validation loss and restoring the best parameters.
inline TrainResult train(ForecastModel model, std::span<const WindowSample> train_set,
                         std::span<const WindowSample> val_set, const TrainConfig& cfg) {
  validate(cfg);
  if (train_set.empty() || val_set.empty()) throw ContractError("train: train and validation splits must be non-empty");
  TrainResult res{model, {}, 0};
  if (cfg.epochs == 0) return res;

  std::vector<const WindowSample*> order;
  for (const auto& s : train_set) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(),
                   [](const WindowSample* a, const WindowSample* b) { return a->t_index < b->t_index; });

  auto params = model.parameters();
  AdamState adam;
  Tape tape;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double total = 0.0;
    std::size_t step = 0;
    for (const WindowSample* s : order) {
      ++step;
      double lv = 0.0;
      try {
        tape.clear();
        for (Parameter* p : params) p->zero_grad();
        const ForwardGraph g = forward_graph(tape, model, *s);
        Var l = loss(g.output, *s, model.config.task);
        lv = l.value()[0];
        if (!std::isfinite(lv)) throw NumericError("non-finite loss");
        tape.backward(l);
        if (cfg.gradient_clip) clip_gradients(params, *cfg.gradient_clip);
        adam_step(params, adam, cfg.learning_rate);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                           ": " + e.what());
      }
      total += lv;
    }
    const double val = split_loss(model, val_set);
    res.history.push_back({epoch, total / static_cast<double>(order.size()), val});
    if (val < best) {
      best = val;
      since_best = 0;
      res.best_epoch = epoch;
      res.model = model;
    } else if (++since_best >= cfg.patience && cfg.patience > 0) {
      break;
    }
    if (cfg.target_loss && val <= *cfg.target_loss) break;
  }
  for (Parameter* p : res.model.parameters()) p->zero_grad();
  return res;
}

}  // namespace gatagnn
