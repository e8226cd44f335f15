#pragma once

#include <array>
#include <cstdint>

#include "ecg/data.hpp"

namespace ecg {

// Deterministic synthetic beat corpora for demos, tests, and desk-scale
// benchmarking when the real databases are not on disk. Each class gets a
// distinct P-QRS-T morphology with per-beat jitter in phase, width,
// amplitude, and noise; samples are normalized to [0,1] with the
// zero-padded tail seen in single-beat exports.
//
// Class totals default to five times the usual 20% test supports so a
// 60/20/20 stratified split lands on familiar per-class counts.
inline constexpr std::array<size_t, 5> kMitBihFullCounts = {90590, 2780, 7240,
                                                            810, 8040};
inline constexpr std::array<size_t, 2> kPtbFullCounts = {4045, 10510};

Dataset synth_mitbih_like(const std::array<size_t, 5>& per_class,
                          uint64_t seed, int input_length = 187);
Dataset synth_ptb_like(const std::array<size_t, 2>& per_class, uint64_t seed,
                       int input_length = 187);

}  // namespace ecg
