#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ecg/data.hpp"
#include "ecg/model.hpp"

namespace ecg {

// Both callbacks watch validation accuracy (max mode). Improvement is a
// strict increase beyond min_delta, so traces replay exactly.
struct TrainConfig {
  size_t batch_size = 128;
  float learning_rate = 1e-3f;
  int max_epochs = 100;
  uint64_t seed = 0;

  int early_stop_patience = 5;
  double early_stop_min_delta = 0.0;

  int plateau_patience = 3;
  double plateau_factor = 0.1;
  double plateau_min_lr = 1e-6;

  int eval_threads = 1;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;  // rate in effect during this epoch
  double wall_seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_acc = 0.0;
  double total_wall_seconds = 0.0;
  bool stopped_early = false;
};

// Halts after `patience` epochs without improvement.
class EarlyStopper {
 public:
  EarlyStopper(int patience, double min_delta);
  // Returns true when training should stop. Query improved() to decide
  // whether to snapshot weights.
  bool update(double metric);
  bool improved() const { return improved_; }
  double best_metric() const { return best_; }
  int best_epoch() const { return best_epoch_; }
  int stale_epochs() const { return stale_; }

 private:
  int patience_;
  double min_delta_;
  double best_;
  int best_epoch_ = 0;
  int epoch_ = 0;
  int stale_ = 0;
  bool improved_ = false;
};

// Scales the learning rate by `factor` after `patience` stagnant epochs.
// The rate never rises and never drops below min_lr.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, int patience, double factor,
                   double min_lr);
  double update(double metric);  // returns the (possibly reduced) rate
  double lr() const { return lr_; }
  int stale_epochs() const { return stale_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double min_lr_;
  double best_;
  int stale_ = 0;
};

// Full loop: shuffle, batch, forward/backward/adam, validate, then the
// plateau and early-stop callbacks. Restores the best-epoch weights
// before returning. Bit-reproducible for a fixed seed and thread count.
TrainHistory train(Network& net, const Dataset& train_set,
                   const Dataset& val_set, const TrainConfig& config,
                   std::ostream* log = nullptr);

// One epoch record per line.
void write_history_jsonl(const TrainHistory& history,
                         const std::filesystem::path& path);

}  // namespace ecg
