#include "ecg/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "ecg/errors.hpp"
#include "ecg/kernels.hpp"

namespace ecg {

using Clock = std::chrono::steady_clock;

uint64_t ConfusionMatrix::row_sum(int truth) const {
  uint64_t s = 0;
  for (int p = 0; p < n_classes; ++p) s += at(truth, p);
  return s;
}

uint64_t ConfusionMatrix::col_sum(int pred) const {
  uint64_t s = 0;
  for (int t = 0; t < n_classes; ++t) s += at(t, pred);
  return s;
}

uint64_t ConfusionMatrix::trace() const {
  uint64_t s = 0;
  for (int i = 0; i < n_classes; ++i) s += at(i, i);
  return s;
}

uint64_t ConfusionMatrix::total() const {
  uint64_t s = 0;
  for (uint64_t c : counts) s += c;
  return s;
}

ClassMetrics metrics_from(const ConfusionMatrix& cm) {
  ClassMetrics m;
  m.per_class.resize(cm.n_classes);
  for (int c = 0; c < cm.n_classes; ++c) {
    const uint64_t tp = cm.at(c, c);
    const uint64_t support = cm.row_sum(c);
    const uint64_t predicted = cm.col_sum(c);
    auto& pc = m.per_class[c];
    pc.support = support;
    pc.precision = predicted ? static_cast<double>(tp) / predicted : 0.0;
    pc.recall = support ? static_cast<double>(tp) / support : 0.0;
    pc.f1 = (pc.precision + pc.recall) > 0.0
                ? 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall)
                : 0.0;
  }
  const uint64_t total = cm.total();
  m.accuracy = total ? static_cast<double>(cm.trace()) / total : 0.0;
  return m;
}

int argmax_class(std::span<const float> logits) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

int env_eval_threads() {
  const char* env = std::getenv("ECG_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n >= 1 ? n : 1;
}

namespace {

struct ChunkResult {
  std::vector<uint64_t> counts;
  double loss_sum = 0.0;
};

void eval_chunk(const Network& net, const Dataset& ds, size_t begin,
                size_t end, int* predictions, ChunkResult* out) {
  Workspace ws = net.make_workspace();
  const int c = net.n_classes();
  out->counts.assign(static_cast<size_t>(c) * c, 0);
  std::vector<float> probs(c);
  std::vector<float> grad(c);
  for (size_t i = begin; i < end; ++i) {
    const BeatRecord& rec = ds.records[i];
    const auto logits = net.forward(ws, rec.samples);
    out->loss_sum += softmax_xent_inplace(logits, rec.label, probs, grad);
    const int pred = argmax_class(logits);
    predictions[i] = pred;
    out->counts[static_cast<size_t>(rec.label) * c + pred] += 1;
  }
}

}  // namespace

EvalResult evaluate(const Network& net, const Dataset& test_set,
                    int n_threads) {
  if (test_set.records.empty()) throw DataError("evaluate: empty test set");
  const int c = net.n_classes();
  const size_t n = test_set.size();
  for (size_t i = 0; i < n; ++i) {
    const BeatRecord& rec = test_set.records[i];
    if (rec.label < 0 || rec.label >= c) {
      throw DataError("record " + std::to_string(i + 1) + ": label " +
                      std::to_string(rec.label) + " out of range for " +
                      std::to_string(c) + " classes");
    }
    if (static_cast<int>(rec.samples.size()) != net.input_length()) {
      throw ShapeError("record " + std::to_string(i + 1) + ": " +
                       std::to_string(rec.samples.size()) +
                       " samples, model expects " +
                       std::to_string(net.input_length()));
    }
  }
  n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(n)));

  EvalResult result;
  result.confusion = ConfusionMatrix(c);
  result.predictions.assign(n, -1);

  std::vector<ChunkResult> chunks(n_threads);
  if (n_threads == 1) {
    eval_chunk(net, test_set, 0, n, result.predictions.data(), &chunks[0]);
  } else {
    std::vector<std::thread> workers;
    const size_t per = (n + n_threads - 1) / n_threads;
    for (int w = 0; w < n_threads; ++w) {
      const size_t begin = std::min(n, w * per);
      const size_t end = std::min(n, begin + per);
      workers.emplace_back(eval_chunk, std::cref(net), std::cref(test_set),
                           begin, end, result.predictions.data(), &chunks[w]);
    }
    for (auto& t : workers) t.join();
  }

  double loss_sum = 0.0;
  for (const ChunkResult& ch : chunks) {
    loss_sum += ch.loss_sum;
    if (ch.counts.empty()) continue;
    for (size_t i = 0; i < result.confusion.counts.size(); ++i) {
      result.confusion.counts[i] += ch.counts[i];
    }
  }
  result.mean_loss = loss_sum / static_cast<double>(n);
  result.metrics = metrics_from(result.confusion);
  return result;
}

ThroughputReport bench_throughput(const Network& net, const Dataset& test_set,
                                  size_t batch_size, int repeats,
                                  int n_threads) {
  if (test_set.records.empty()) throw DataError("bench: empty test set");
  if (repeats < 3) throw DataError("bench: need at least 3 repeats");
  if (batch_size < 1) throw DataError("bench: batch size must be positive");
  if (test_set.input_length != net.input_length()) {
    throw ShapeError("bench: dataset beat length " +
                     std::to_string(test_set.input_length) +
                     " does not match model input " +
                     std::to_string(net.input_length()));
  }

  ThroughputReport report;
  report.batch_size = batch_size;
  report.repeats = repeats;
  const size_t n = test_set.size();
  report.predictions.assign(n, -1);
  n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(n)));

  // Batched inference including the softmax. One pass over the whole set.
  auto one_pass = [&](size_t begin, size_t end, Workspace& ws,
                      std::vector<float>& probs) {
    for (size_t b = begin; b < end; b += batch_size) {
      const size_t stop = std::min(end, b + batch_size);
      for (size_t i = b; i < stop; ++i) {
        const auto logits = net.forward(ws, test_set.records[i].samples);
        softmax_inplace(logits, probs);
        report.predictions[i] = argmax_class(logits);
      }
    }
  };

  auto run_passes = [&](int count) {
    if (n_threads == 1) {
      Workspace ws = net.make_workspace();
      std::vector<float> probs(net.n_classes());
      for (int r = 0; r < count; ++r) one_pass(0, n, ws, probs);
      return;
    }
    std::vector<std::thread> workers;
    const size_t per = (n + n_threads - 1) / n_threads;
    for (int w = 0; w < n_threads; ++w) {
      const size_t begin = std::min(n, w * per);
      const size_t end = std::min(n, begin + per);
      workers.emplace_back([&, begin, end, count] {
        Workspace ws = net.make_workspace();
        std::vector<float> probs(net.n_classes());
        for (int r = 0; r < count; ++r) one_pass(begin, end, ws, probs);
      });
    }
    for (auto& t : workers) t.join();
  };

  run_passes(1);  // warm-up, untimed
  const auto start = Clock::now();
  run_passes(repeats);
  const auto stop = Clock::now();

  report.wall_seconds = std::chrono::duration<double>(stop - start).count();
  report.samples_per_second =
      static_cast<double>(n) * repeats / report.wall_seconds;
  return report;
}

namespace {

double percentile_ms(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const size_t rank = static_cast<size_t>(
      std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::min(sorted.size() - 1, rank == 0 ? 0 : rank - 1)];
}

}  // namespace

LatencyReport replay_stream(const Network& net, const Dataset& beats,
                            double rate_per_second) {
  if (beats.records.empty()) throw DataError("replay: empty input");
  if (!(rate_per_second > 0.0)) throw DataError("replay: rate must be positive");

  Workspace ws = net.make_workspace();
  std::vector<float> probs(net.n_classes());
  const size_t n = beats.size();
  std::vector<double> latency_ms(n);

  const auto start = Clock::now();
  for (size_t i = 0; i < n; ++i) {
    const auto release =
        start + std::chrono::duration_cast<Clock::duration>(
                    std::chrono::duration<double>(static_cast<double>(i) /
                                                  rate_per_second));
    std::this_thread::sleep_until(release);
    const auto logits = net.forward(ws, beats.records[i].samples);
    softmax_inplace(logits, probs);
    const auto done = Clock::now();
    latency_ms[i] = std::chrono::duration<double, std::milli>(done - release)
                        .count();
  }
  const auto end = Clock::now();

  std::vector<double> sorted = latency_ms;
  std::sort(sorted.begin(), sorted.end());
  LatencyReport report;
  report.beats = n;
  report.p50_ms = percentile_ms(sorted, 0.50);
  report.p95_ms = percentile_ms(sorted, 0.95);
  report.p99_ms = percentile_ms(sorted, 0.99);
  report.max_ms = sorted.back();
  report.achieved_rate =
      static_cast<double>(n) /
      std::chrono::duration<double>(end - start).count();
  return report;
}

namespace {

double round4(double x) { return std::round(x * 1e4) / 1e4; }

}  // namespace

void write_report_json(const std::filesystem::path& path,
                       const std::vector<std::string>& label_names,
                       const EvalResult* eval,
                       const ThroughputReport* throughput,
                       const LatencyReport* latency) {
  nlohmann::json doc;
  doc["label_names"] = label_names;
  if (eval) {
    const ConfusionMatrix& cm = eval->confusion;
    nlohmann::json matrix = nlohmann::json::array();
    for (int t = 0; t < cm.n_classes; ++t) {
      nlohmann::json row = nlohmann::json::array();
      for (int p = 0; p < cm.n_classes; ++p) row.push_back(cm.at(t, p));
      matrix.push_back(row);
    }
    doc["confusion_matrix"] = matrix;
    nlohmann::json per_class = nlohmann::json::array();
    for (size_t c = 0; c < eval->metrics.per_class.size(); ++c) {
      const auto& pc = eval->metrics.per_class[c];
      per_class.push_back({{"label", label_names[c]},
                           {"precision", round4(pc.precision)},
                           {"recall", round4(pc.recall)},
                           {"f1", round4(pc.f1)},
                           {"support", pc.support}});
    }
    doc["per_class"] = per_class;
    doc["accuracy"] = round4(eval->metrics.accuracy);
  }
  if (throughput) {
    doc["throughput"] = {
        {"samples_per_second", round4(throughput->samples_per_second)},
        {"batch_size", throughput->batch_size},
        {"repeats", throughput->repeats},
        {"wall_seconds", round4(throughput->wall_seconds)}};
  }
  if (latency) {
    doc["latency"] = {{"p50_ms", round4(latency->p50_ms)},
                      {"p95_ms", round4(latency->p95_ms)},
                      {"p99_ms", round4(latency->p99_ms)},
                      {"max_ms", round4(latency->max_ms)},
                      {"achieved_rate", round4(latency->achieved_rate)},
                      {"beats", latency->beats}};
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
}

}  // namespace ecg
