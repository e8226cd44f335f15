#include "ecg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "ecg/errors.hpp"
#include "ecg/model.hpp"
#include "ecg/rng.hpp"

namespace ecg {

namespace {

float parse_sample(std::string_view field, size_t row, size_t col) {
  float v = 0.0f;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw DataError("row " + std::to_string(row) + ", field " +
                    std::to_string(col + 1) + ": not a number: '" +
                    std::string(field) + "'");
  }
  if (!std::isfinite(v)) {
    throw DataError("row " + std::to_string(row) + ", field " +
                    std::to_string(col + 1) + ": non-finite sample");
  }
  return v;
}

int parse_label(std::string_view field, size_t row) {
  // Labels in the wild come as "1" or "1.0"; accept both.
  int v = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec == std::errc{} && res.ptr == field.data() + field.size()) return v;
  float f = 0.0f;
  res = std::from_chars(field.data(), field.data() + field.size(), f);
  if (res.ec == std::errc{} && res.ptr == field.data() + field.size() &&
      f == std::floor(f) && f >= 0.0f) {
    return static_cast<int>(f);
  }
  throw DataError("row " + std::to_string(row) +
                  ": label is not an integer: '" + std::string(field) + "'");
}

}  // namespace

Dataset load_beats_csv(const std::filesystem::path& path, int expected_length,
                       bool strict, int n_classes) {
  if (expected_length < 1) throw DataError("expected_length must be positive");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  Dataset ds;
  ds.input_length = expected_length;
  int max_label = -1;
  std::string line;
  size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    BeatRecord rec;
    rec.samples.reserve(expected_length);
    size_t col = 0;
    size_t start = 0;
    while (true) {
      const size_t comma = line.find(',', start);
      const std::string_view field(
          line.data() + start,
          (comma == std::string::npos ? line.size() : comma) - start);
      if (col < static_cast<size_t>(expected_length)) {
        float v = parse_sample(field, row, col);
        if (v < 0.0f || v > 1.0f) {
          if (strict) {
            throw DataError("row " + std::to_string(row) + ", field " +
                            std::to_string(col + 1) + ": sample " +
                            std::to_string(v) + " outside [0,1]");
          }
          v = std::clamp(v, 0.0f, 1.0f);
        }
        rec.samples.push_back(v);
      } else if (col == static_cast<size_t>(expected_length)) {
        rec.label = parse_label(field, row);
        if (rec.label < 0) {
          throw DataError("row " + std::to_string(row) + ": negative label");
        }
      }
      ++col;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (col != static_cast<size_t>(expected_length) + 1) {
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(expected_length + 1) + " fields, got " +
                      std::to_string(col));
    }
    if (n_classes > 0 && rec.label >= n_classes) {
      throw DataError("row " + std::to_string(row) + ": label " +
                      std::to_string(rec.label) + " out of range for " +
                      std::to_string(n_classes) + " classes");
    }
    max_label = std::max(max_label, rec.label);
    ds.records.push_back(std::move(rec));
  }
  if (ds.records.empty()) throw DataError(path.string() + ": no records");

  const int classes = n_classes > 0 ? n_classes : max_label + 1;
  ds.label_names = default_label_names(classes);
  if (classes == 5) ds.source = "MIT-BIH";
  if (classes == 2) ds.source = "PTB";
  return ds;
}

void write_beats_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  std::string line;
  char buf[64];
  for (const BeatRecord& rec : ds.records) {
    line.clear();
    for (float v : rec.samples) {
      // to_chars emits the shortest round-trip form
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      line.append(buf, res.ptr);
      line.push_back(',');
    }
    line.append(std::to_string(rec.label));
    line.push_back('\n');
    out << line;
  }
  if (!out) throw DataError("short write to " + path.string());
}

namespace {

// Largest-remainder apportionment of `total` across `weights`.
std::vector<size_t> apportion(size_t total, std::span<const double> weights) {
  std::vector<size_t> counts(weights.size());
  std::vector<std::pair<double, size_t>> remainders;
  size_t assigned = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i];
    counts[i] = static_cast<size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (size_t k = 0; assigned < total; ++k, ++assigned) {
    counts[remainders[k % remainders.size()].second] += 1;
  }
  return counts;
}

Dataset like(const Dataset& ds) {
  Dataset out;
  out.label_names = ds.label_names;
  out.source = ds.source;
  out.input_length = ds.input_length;
  return out;
}

std::map<int, std::vector<uint32_t>> indices_by_class(const Dataset& ds) {
  std::map<int, std::vector<uint32_t>> by_class;
  for (size_t i = 0; i < ds.records.size(); ++i) {
    by_class[ds.records[i].label].push_back(static_cast<uint32_t>(i));
  }
  return by_class;
}

}  // namespace

SplitResult stratified_split(const Dataset& ds,
                             const std::array<double, 3>& ratios,
                             uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DataError("split ratios must sum to 1");
  }
  SplitResult out{like(ds), like(ds), like(ds)};
  auto by_class = indices_by_class(ds);
  for (auto& [label, idx] : by_class) {
    if (idx.size() < 3) {
      throw DataError("class " + std::to_string(label) + " has only " +
                      std::to_string(idx.size()) +
                      " records; need at least 3 to split");
    }
    SplitMix64 rng(mix_seed(seed, 0x73706c6974ull + label));
    shuffle(idx, rng);
    const auto counts = apportion(idx.size(), ratios);
    size_t pos = 0;
    Dataset* parts[3] = {&out.train, &out.val, &out.test};
    for (int p = 0; p < 3; ++p) {
      for (size_t k = 0; k < counts[p]; ++k, ++pos) {
        parts[p]->records.push_back(ds.records[idx[pos]]);
      }
    }
  }
  return out;
}

Dataset stratified_subset(const Dataset& ds, size_t n, uint64_t seed) {
  if (n == 0 || n > ds.size()) {
    throw DataError("subset size must be in [1, dataset size]");
  }
  auto by_class = indices_by_class(ds);
  std::vector<double> weights;
  std::vector<const std::vector<uint32_t>*> groups;
  for (auto& [label, idx] : by_class) {
    weights.push_back(static_cast<double>(idx.size()) /
                      static_cast<double>(ds.size()));
    groups.push_back(&idx);
  }
  const auto counts = apportion(n, weights);
  Dataset out = like(ds);
  size_t g = 0;
  for (auto& [label, idx] : by_class) {
    std::vector<uint32_t> pool = idx;
    SplitMix64 rng(mix_seed(seed, 0x737562736574ull + label));
    shuffle(pool, rng);
    const size_t take = std::min(counts[g++], pool.size());
    for (size_t k = 0; k < take; ++k) out.records.push_back(ds.records[pool[k]]);
  }
  return out;
}

std::map<int, size_t> class_distribution(const Dataset& ds) {
  std::map<int, size_t> counts;
  for (const BeatRecord& rec : ds.records) counts[rec.label] += 1;
  return counts;
}

BatchPlan::BatchPlan(size_t n_records, size_t batch_size, uint64_t seed)
    : batch_size_(batch_size) {
  if (batch_size < 1) throw DataError("batch size must be at least 1");
  order_.resize(n_records);
  std::iota(order_.begin(), order_.end(), 0u);
  SplitMix64 rng(seed);
  shuffle(order_, rng);
}

size_t BatchPlan::batch_count() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

std::span<const uint32_t> BatchPlan::batch(size_t i) const {
  const size_t begin = i * batch_size_;
  const size_t end = std::min(begin + batch_size_, order_.size());
  return {order_.data() + begin, end - begin};
}

}  // namespace ecg
