#include "spdregime/models/training.hpp"

#include "spdregime/error.hpp"
#include "spdregime/util/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>

namespace spdregime::models {

std::vector<std::size_t> epoch_order(std::span<const int> labels, bool oversample,
                                     std::uint64_t seed, int epoch) {
  std::mt19937_64 rng(util::derive_seed(seed ^ 0x7261696EULL, static_cast<std::uint64_t>(epoch)));
  std::vector<std::size_t> order;
  if (!oversample) {
    order.resize(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  } else {
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || labels[i] >= kNumClasses) throw DataError("label out of range");
      by_class[labels[i]].push_back(i);
    }
    std::size_t target = 0;
    for (const auto& c : by_class) target = std::max(target, c.size());
    for (const auto& c : by_class) {
      if (c.empty()) continue;
      order.insert(order.end(), c.begin(), c.end());
      // Top up with draws without replacement, cycling through fresh shuffles.
      std::vector<std::size_t> pool;
      for (std::size_t extra = c.size(); extra < target; ++extra) {
        if (pool.empty()) {
          pool = c;
          std::shuffle(pool.begin(), pool.end(), rng);
        }
        order.push_back(pool.back());
        pool.pop_back();
      }
    }
  }
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

TrainingReport train(Network& model, const LabeledSet& train_set, const LabeledSet& val_set,
                     const TrainOptions& options) {
  if (train_set.empty()) throw DataError("training set is empty");
  if (train_set.inputs.size() != train_set.labels.size() ||
      val_set.inputs.size() != val_set.labels.size())
    throw DataError("inputs and labels differ in length");

  const ModelConfig cfg = model.config();
  auto params = model.parameters();
  std::vector<Matrix> velocity(params.size());

  TrainingReport report;
  report.best_val_acc = -1.0;
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    const auto order = epoch_order(train_set.labels, cfg.oversample, cfg.seed, epoch);

    double loss_sum = 0.0;
    long correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      std::vector<SPDMatrix> xs;
      std::vector<int> ys;
      xs.reserve(end - begin);
      ys.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        xs.push_back(train_set.inputs[order[k]]);
        ys.push_back(train_set.labels[order[k]]);
      }
      const BatchResult r = model.compute_batch(xs, ys, BatchOptions{});
      if (!std::isfinite(r.loss)) throw TrainingDiverged(epoch);
      loss_sum += r.loss * static_cast<double>(xs.size());
      for (std::size_t k = 0; k < xs.size(); ++k)
        if (argmax(r.logits[k]) == ys[k]) ++correct;

      for (std::size_t p = 0; p < params.size(); ++p) {
        if (params[p].kind == ParamKind::Stiefel)
          layers::stiefel_step(*params[p].value, r.grads[p], velocity[p], lr, cfg.momentum);
        else
          layers::euclidean_step(*params[p].value, r.grads[p], velocity[p], lr, cfg.momentum);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    if (!std::isfinite(rec.train_loss)) throw TrainingDiverged(epoch);
    const bool has_val = !val_set.empty();
    rec.val_acc = has_val ? evaluate(model, val_set).accuracy
                          : std::numeric_limits<double>::quiet_NaN();
    report.epochs.push_back(rec);

    const double score = has_val ? rec.val_acc : 0.0;
    if (!has_val || score > report.best_val_acc) {
      report.best_val_acc = has_val ? score : report.best_val_acc;
      report.best_epoch = epoch;
      report.best = model.clone();
    }
    if (options.on_epoch) options.on_epoch(rec, model);
  }
  if (val_set.empty()) report.best_val_acc = std::numeric_limits<double>::quiet_NaN();
  return report;
}

void write_report_csv(const TrainingReport& report, std::ostream& out) {
  out << "epoch,train_loss,train_acc,val_acc\n";
  char buf[128];
  for (const auto& e : report.epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.train_acc,
                  e.val_acc);
    out << buf;
  }
}

EvalResult evaluate_predictions(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.empty()) throw DataError("cannot evaluate on an empty dataset");
  if (truth.size() != predicted.size()) throw DataError("prediction count mismatch");
  EvalResult r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= kNumClasses || predicted[i] < 0 || predicted[i] >= kNumClasses)
      throw DataError("label out of range");
    ++r.confusion[truth[i]][predicted[i]];
  }
  const double total = static_cast<double>(truth.size());
  long diag = 0;
  double max_true_share = 0.0;
  double max_pred_share = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    long row = 0;
    long col = 0;
    for (int k = 0; k < kNumClasses; ++k) {
      row += r.confusion[c][k];
      col += r.confusion[k][c];
    }
    diag += r.confusion[c][c];
    r.recall[c] = row > 0 ? static_cast<double>(r.confusion[c][c]) / static_cast<double>(row) : 0.0;
    max_true_share = std::max(max_true_share, static_cast<double>(row) / total);
    max_pred_share = std::max(max_pred_share, static_cast<double>(col) / total);
  }
  r.accuracy = static_cast<double>(diag) / total;
  r.corner_solution =
      max_pred_share > kCornerPredictedShare && max_true_share <= kCornerBalancedShare;
  return r;
}

EvalResult evaluate(const Network& model, const LabeledSet& data) {
  std::vector<int> predicted;
  predicted.reserve(data.size());
  for (const auto& x : data.inputs) predicted.push_back(model.predict(x));
  return evaluate_predictions(data.labels, predicted);
}

}  // namespace spdregime::models
