#pragma once

#include "spdregime/models/network.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

namespace spdregime::models {

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;  // NaN when no validation set was given
  double learning_rate = 0.0;
};

struct TrainingReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_acc = 0.0;
  /// Copy of the model at best_epoch (highest validation accuracy, first
  /// epoch wins ties; final epoch when there is no validation set).
  std::unique_ptr<Network> best;
};

struct TrainOptions {
  /// Called after every epoch with the updated model.
  std::function<void(const EpochRecord&, const Network&)> on_epoch;
};

/// Mini-batch Riemannian SGD with momentum: stiefel_step for BiMap weights,
/// heavy-ball SGD for head and RBN bias parameters. Minority classes are
/// oversampled to parity when config.oversample is set; batch order is
/// reshuffled every epoch from a seed derived from config.seed.
/// Throws TrainingDiverged on a non-finite loss.
TrainingReport train(Network& model, const LabeledSet& train_set, const LabeledSet& val_set,
                     const TrainOptions& options = {});

/// Per-epoch training order (indices into the training set) for one epoch.
std::vector<std::size_t> epoch_order(std::span<const int> labels, bool oversample,
                                     std::uint64_t seed, int epoch);

/// CSV with header `epoch,train_loss,train_acc,val_acc`.
void write_report_csv(const TrainingReport& report, std::ostream& out);

using Confusion = std::array<std::array<long, kNumClasses>, kNumClasses>;

struct EvalResult {
  double accuracy = 0.0;
  std::array<double, kNumClasses> recall{};  // 0 for classes without samples
  Confusion confusion{};                     // rows true, columns predicted
  bool corner_solution = false;
};

/// Predicted-class share above which a classifier counts as a corner solution.
inline constexpr double kCornerPredictedShare = 0.9;
/// The flag is only raised when no true class exceeds this share.
inline constexpr double kCornerBalancedShare = 0.6;

EvalResult evaluate_predictions(std::span<const int> truth, std::span<const int> predicted);
EvalResult evaluate(const Network& model, const LabeledSet& data);

}  // namespace spdregime::models
