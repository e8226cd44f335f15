#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ecg {

// One normalized beat: input_length samples in [0,1] plus a class index.
struct BeatRecord {
  std::vector<float> samples;
  int label = 0;
};

struct Dataset {
  std::vector<BeatRecord> records;
  std::vector<std::string> label_names;
  std::string source = "other";  // "MIT-BIH" | "PTB" | "other"
  int input_length = 0;

  size_t size() const { return records.size(); }
  int n_classes() const { return static_cast<int>(label_names.size()); }
};

// CSV rows are expected_length floats plus a trailing integer label, no
// header. In strict mode samples outside [0,1] are rejected; otherwise
// they are clamped. n_classes = 0 infers the class count from the labels.
Dataset load_beats_csv(const std::filesystem::path& path, int expected_length,
                       bool strict = true, int n_classes = 0);
void write_beats_csv(const Dataset& ds, const std::filesystem::path& path);

struct SplitResult {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Per class: shuffle with the seeded generator, then cut by ratios using
// largest-remainder rounding. Partitions are disjoint and exhaustive.
SplitResult stratified_split(const Dataset& ds,
                             const std::array<double, 3>& ratios,
                             uint64_t seed);

// Proportional per-class subsample of n records (largest remainder).
Dataset stratified_subset(const Dataset& ds, size_t n, uint64_t seed);

// Classes with zero records are absent from the map.
std::map<int, size_t> class_distribution(const Dataset& ds);

// One epoch worth of shuffled batches; the final partial batch is kept.
class BatchPlan {
 public:
  BatchPlan(size_t n_records, size_t batch_size, uint64_t seed);
  size_t batch_count() const;
  std::span<const uint32_t> batch(size_t i) const;

 private:
  std::vector<uint32_t> order_;
  size_t batch_size_;
};

}  // namespace ecg
