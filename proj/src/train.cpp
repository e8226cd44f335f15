#include "ecg/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "ecg/errors.hpp"
#include "ecg/eval.hpp"
#include "ecg/rng.hpp"

namespace ecg {

using Clock = std::chrono::steady_clock;

EarlyStopper::EarlyStopper(int patience, double min_delta)
    : patience_(patience),
      min_delta_(min_delta),
      best_(-std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw DataError("early stop patience must be >= 1");
}

bool EarlyStopper::update(double metric) {
  if (!std::isfinite(metric)) throw NumericError("early stop: non-finite metric");
  ++epoch_;
  improved_ = metric > best_ + min_delta_;
  if (improved_) {
    best_ = metric;
    best_epoch_ = epoch_;
    stale_ = 0;
    return false;
  }
  ++stale_;
  return stale_ >= patience_;
}

PlateauScheduler::PlateauScheduler(double initial_lr, int patience,
                                   double factor, double min_lr)
    : lr_(initial_lr),
      patience_(patience),
      factor_(factor),
      min_lr_(min_lr),
      best_(-std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw DataError("plateau patience must be >= 1");
  if (!(factor > 0.0 && factor < 1.0)) {
    throw DataError("plateau factor must be in (0, 1)");
  }
}

double PlateauScheduler::update(double metric) {
  if (!std::isfinite(metric)) throw NumericError("plateau: non-finite metric");
  if (metric > best_) {
    best_ = metric;
    stale_ = 0;
    return lr_;
  }
  ++stale_;
  if (stale_ >= patience_) {
    lr_ = std::max(lr_ * factor_, min_lr_);
    stale_ = 0;
  }
  return lr_;
}

namespace {

void check_dataset(const Network& net, const Dataset& ds, const char* which) {
  if (ds.records.empty()) {
    throw DataError(std::string(which) + " set is empty");
  }
  if (ds.input_length != net.input_length()) {
    throw ShapeError(std::string(which) + " set beat length " +
                     std::to_string(ds.input_length) +
                     " does not match model input " +
                     std::to_string(net.input_length()));
  }
  for (size_t i = 0; i < ds.records.size(); ++i) {
    const int label = ds.records[i].label;
    if (label < 0 || label >= net.n_classes()) {
      throw DataError(std::string(which) + " record " + std::to_string(i + 1) +
                      ": label " + std::to_string(label) +
                      " out of range for " + std::to_string(net.n_classes()) +
                      " classes");
    }
  }
}

}  // namespace

TrainHistory train(Network& net, const Dataset& train_set,
                   const Dataset& val_set, const TrainConfig& config,
                   std::ostream* log) {
  check_dataset(net, train_set, "train");
  check_dataset(net, val_set, "validation");

  Workspace ws = net.make_workspace();
  OptimizerConfig opt;
  opt.learning_rate = config.learning_rate;

  EarlyStopper stopper(config.early_stop_patience, config.early_stop_min_delta);
  PlateauScheduler plateau(config.learning_rate, config.plateau_patience,
                           config.plateau_factor, config.plateau_min_lr);

  TrainHistory history;
  std::vector<std::vector<float>> best_weights = net.snapshot_values();
  std::vector<const float*> batch_beats;
  std::vector<int> batch_labels;
  const auto run_start = Clock::now();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    const double lr_this_epoch = plateau.lr();
    opt.learning_rate = static_cast<float>(lr_this_epoch);

    BatchPlan plan(train_set.size(), config.batch_size,
                   mix_seed(config.seed, 0x65706f6368ull + epoch));
    double loss_sum = 0.0;
    size_t correct = 0;
    for (size_t b = 0; b < plan.batch_count(); ++b) {
      const auto idx = plan.batch(b);
      batch_beats.clear();
      batch_labels.clear();
      for (uint32_t i : idx) {
        batch_beats.push_back(train_set.records[i].samples.data());
        batch_labels.push_back(train_set.records[i].label);
      }
      int hits = 0;
      double batch_loss;
      try {
        batch_loss = net.batch_backward(ws, batch_beats.data(),
                                        batch_labels.data(),
                                        static_cast<int>(idx.size()), &hits);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b + 1) + ": " + e.what());
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b + 1) + ": non-finite loss");
      }
      loss_sum += batch_loss * static_cast<double>(idx.size());
      correct += static_cast<size_t>(hits);
      for (ParamTensor& t : net.tensors()) {
        if (t.trainable) adam_step(t, opt);
      }
    }

    const EvalResult val = evaluate(net, val_set, config.eval_threads);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.train_acc =
        static_cast<double>(correct) / static_cast<double>(train_set.size());
    rec.val_loss = val.mean_loss;
    rec.val_acc = val.metrics.accuracy;
    rec.lr = lr_this_epoch;
    rec.wall_seconds =
        std::chrono::duration<double>(Clock::now() - epoch_start).count();
    history.epochs.push_back(rec);

    if (log) {
      (*log) << "epoch " << epoch << ": train_loss=" << rec.train_loss
             << " train_acc=" << rec.train_acc << " val_loss=" << rec.val_loss
             << " val_acc=" << rec.val_acc << " lr=" << rec.lr << " ("
             << rec.wall_seconds << "s)\n";
    }

    plateau.update(rec.val_acc);
    const bool stop = stopper.update(rec.val_acc);
    if (stopper.improved()) best_weights = net.snapshot_values();
    if (stop) {
      history.stopped_early = true;
      break;
    }
  }

  net.restore_values(best_weights);
  history.best_epoch = stopper.best_epoch();
  history.best_val_acc = stopper.best_metric();
  history.total_wall_seconds =
      std::chrono::duration<double>(Clock::now() - run_start).count();
  return history;
}

void write_history_jsonl(const TrainHistory& history,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const EpochRecord& rec : history.epochs) {
    nlohmann::json line = {
        {"epoch", rec.epoch},       {"train_loss", rec.train_loss},
        {"train_acc", rec.train_acc}, {"val_loss", rec.val_loss},
        {"val_acc", rec.val_acc},   {"lr", rec.lr},
        {"wall_seconds", rec.wall_seconds}};
    out << line.dump() << '\n';
  }
  if (!out) throw DataError("short write to " + path.string());
}

}  // namespace ecg
