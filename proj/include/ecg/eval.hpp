#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "ecg/data.hpp"
#include "ecg/model.hpp"

namespace ecg {

// Rows are true classes, columns are predictions.
struct ConfusionMatrix {
  int n_classes = 0;
  std::vector<uint64_t> counts;

  explicit ConfusionMatrix(int n = 0)
      : n_classes(n), counts(static_cast<size_t>(n) * n, 0) {}
  uint64_t& at(int truth, int pred) {
    return counts[static_cast<size_t>(truth) * n_classes + pred];
  }
  uint64_t at(int truth, int pred) const {
    return counts[static_cast<size_t>(truth) * n_classes + pred];
  }
  uint64_t row_sum(int truth) const;
  uint64_t col_sum(int pred) const;
  uint64_t trace() const;
  uint64_t total() const;
};

struct ClassMetrics {
  struct PerClass {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    uint64_t support = 0;
  };
  std::vector<PerClass> per_class;
  double accuracy = 0.0;
};

ClassMetrics metrics_from(const ConfusionMatrix& cm);

// Ties at the argmax resolve to the lowest class index.
int argmax_class(std::span<const float> logits);

struct EvalResult {
  ConfusionMatrix confusion;
  ClassMetrics metrics;
  double mean_loss = 0.0;
  std::vector<int> predictions;  // one per record, in dataset order
};

// Forward-only pass over the whole set. n_threads > 1 fans out over
// contiguous chunks; results are independent of the worker count.
EvalResult evaluate(const Network& net, const Dataset& test_set,
                    int n_threads = 1);

struct ThroughputReport {
  double samples_per_second = 0.0;
  size_t batch_size = 0;
  int repeats = 0;
  double wall_seconds = 0.0;
  std::vector<int> predictions;  // from the final timed pass
};

// Timed batched inference including the softmax; one untimed warm-up pass.
ThroughputReport bench_throughput(const Network& net, const Dataset& test_set,
                                  size_t batch_size, int repeats,
                                  int n_threads = 1);

struct LatencyReport {
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
  double achieved_rate = 0.0;  // beats per second over the whole replay
  size_t beats = 0;
};

// Releases beats on a fixed-rate schedule into a single consumer. Latency
// is completion minus scheduled release, so queueing delay accrues when
// classification cannot keep up. Nothing is dropped.
LatencyReport replay_stream(const Network& net, const Dataset& beats,
                            double rate_per_second);

// JSON report: confusion matrix (integers), per-class metrics (4 decimal
// places), accuracy, plus throughput/latency sections when present.
void write_report_json(const std::filesystem::path& path,
                       const std::vector<std::string>& label_names,
                       const EvalResult* eval,
                       const ThroughputReport* throughput,
                       const LatencyReport* latency);

// Evaluation worker count: ECG_THREADS when set and valid, else 1.
int env_eval_threads();

}  // namespace ecg
