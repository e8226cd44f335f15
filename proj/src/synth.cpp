#include "ecg/synth.hpp"

#include <algorithm>
#include <cmath>

#include "ecg/rng.hpp"

namespace ecg {

namespace {

// One Gaussian deflection. Positions/widths are in units of a 187-sample
// beat and rescaled for other lengths.
struct Wave {
  float center;
  float width;
  float amp;
};

constexpr float kBaseline = 0.10f;

void add_wave(std::vector<float>& beat, const Wave& w, float shift,
              float width_scale, float amp_scale, float unit) {
  const float c = w.center * unit + shift;
  const float sd = std::max(0.6f, w.width * unit * width_scale);
  const float a = w.amp * amp_scale;
  const int lo = std::max(0, static_cast<int>(c - 4.0f * sd));
  const int hi =
      std::min(static_cast<int>(beat.size()) - 1, static_cast<int>(c + 4.0f * sd));
  for (int t = lo; t <= hi; ++t) {
    const float z = (static_cast<float>(t) - c) / sd;
    beat[t] += a * std::exp(-0.5f * z * z);
  }
}

// A raised plateau between two points, with smooth ends. Models an
// elevated ST segment.
void add_plateau(std::vector<float>& beat, float from, float to, float amp,
                 float shift, float unit) {
  const float a = from * unit + shift;
  const float b = to * unit + shift;
  const float ramp = 3.0f;
  const int lo = std::max(0, static_cast<int>(a - ramp));
  const int hi = std::min(static_cast<int>(beat.size()) - 1,
                          static_cast<int>(b + ramp));
  for (int t = lo; t <= hi; ++t) {
    const float x = static_cast<float>(t);
    float g = 1.0f;
    if (x < a) g = 1.0f - (a - x) / ramp;
    if (x > b) g = 1.0f - (x - b) / ramp;
    beat[t] += amp * std::max(0.0f, g);
  }
}

struct BeatShape {
  std::vector<Wave> waves;
  bool st_elevation = false;
};

// MIT-BIH style class morphologies (5 classes).
BeatShape mitbih_shape(int label, SplitMix64& rng) {
  BeatShape s;
  switch (label) {
    case 0:  // normal sinus beat: P, narrow QRS, upright T
      s.waves = {{18, 3.0f, 0.14f},
                 {30, 1.6f, -0.10f},
                 {36, 2.2f, 0.74f},
                 {42, 1.8f, -0.12f},
                 {65, 7.5f, 0.22f}};
      break;
    case 1:  // supraventricular: P absent, early narrow R, early T
      s.waves = {{31, 1.8f, 0.62f},
                 {37, 1.6f, -0.10f},
                 {56, 6.0f, 0.18f}};
      break;
    case 2:  // ventricular: wide R, deep wide S, inverted T
      s.waves = {{36, 6.0f, 0.66f},
                 {46, 5.0f, -0.28f},
                 {70, 8.0f, -0.20f}};
      break;
    case 3:  // fusion: halfway between normal and ventricular
      s.waves = {{18, 3.0f, 0.07f},
                 {36, 4.0f, 0.70f},
                 {44, 3.4f, -0.20f},
                 {67, 7.5f, 0.03f}};
      break;
    default:  // unknown/paced: double peak, flat T, ripple
      s.waves = {{32, 2.4f, 0.52f},
                 {41, 2.4f, 0.56f},
                 {62, 6.0f, 0.05f}};
      for (int k = 0; k < 3; ++k) {
        s.waves.push_back(
            {78.0f + 9.0f * static_cast<float>(k), 1.4f,
             rng.uniform(0.04f, 0.10f)});
      }
      break;
  }
  return s;
}

// PTB style morphologies (normal vs infarct-like abnormal).
BeatShape ptb_shape(int label, SplitMix64& rng) {
  if (label == 0) {
    BeatShape s;
    s.waves = {{18, 3.0f, 0.14f},
               {30, 1.6f, -0.10f},
               {36, 2.2f, 0.72f},
               {42, 1.8f, -0.12f},
               {65, 7.5f, 0.22f}};
    return s;
  }
  BeatShape s;
  switch (rng.next_below(3)) {
    case 0:  // ST elevation with merged tall T
      s.waves = {{18, 3.0f, 0.12f},
                 {30, 1.6f, -0.08f},
                 {36, 2.4f, 0.70f},
                 {66, 8.0f, 0.34f}};
      s.st_elevation = true;
      break;
    case 1:  // deep Q with inverted T
      s.waves = {{18, 3.0f, 0.10f},
                 {30, 2.6f, -0.30f},
                 {36, 2.2f, 0.60f},
                 {42, 1.8f, -0.10f},
                 {66, 7.5f, -0.24f}};
      break;
    default:  // wide bundle-branch-like QRS
      s.waves = {{18, 3.0f, 0.10f},
                 {35, 5.5f, 0.58f},
                 {44, 4.5f, 0.30f},
                 {68, 8.0f, -0.14f}};
      break;
  }
  return s;
}

BeatRecord make_beat(int label, bool ptb, int input_length, SplitMix64& rng) {
  BeatRecord rec;
  rec.label = label;
  rec.samples.assign(input_length, 0.0f);
  const float unit = static_cast<float>(input_length) / 187.0f;

  const float shift = rng.uniform(-4.0f, 4.0f) * unit;
  const float width_scale = rng.uniform(0.85f, 1.15f);
  const float amp_scale = rng.uniform(0.85f, 1.05f);
  // Beat occupies a prefix of the window; the rest stays zero-padded.
  const int support = static_cast<int>(rng.uniform(100.0f, 145.0f) * unit);
  const int active = std::min(input_length, std::max(8, support));

  std::vector<float> wave(input_length, 0.0f);
  BeatShape shape = ptb ? ptb_shape(label, rng) : mitbih_shape(label, rng);
  for (const Wave& w : shape.waves) {
    add_wave(wave, w, shift, width_scale, amp_scale, unit);
  }
  if (shape.st_elevation) {
    add_plateau(wave, 42.0f, 62.0f, 0.20f * amp_scale, shift, unit);
  }

  for (int t = 0; t < active; ++t) {
    const float noise = rng.uniform(-0.025f, 0.025f);
    rec.samples[t] = std::clamp(kBaseline + wave[t] + noise, 0.0f, 1.0f);
  }
  return rec;
}

}  // namespace

Dataset synth_mitbih_like(const std::array<size_t, 5>& per_class,
                          uint64_t seed, int input_length) {
  Dataset ds;
  ds.input_length = input_length;
  ds.label_names = {"Normal", "Supraventricular", "Ventricular", "Fusion Beat",
                    "Unknown"};
  ds.source = "MIT-BIH";
  SplitMix64 rng(mix_seed(seed, 0x6d697462696855ull));
  for (int label = 0; label < 5; ++label) {
    for (size_t i = 0; i < per_class[label]; ++i) {
      ds.records.push_back(make_beat(label, false, input_length, rng));
    }
  }
  return ds;
}

Dataset synth_ptb_like(const std::array<size_t, 2>& per_class, uint64_t seed,
                       int input_length) {
  Dataset ds;
  ds.input_length = input_length;
  ds.label_names = {"Normal", "Abnormal"};
  ds.source = "PTB";
  SplitMix64 rng(mix_seed(seed, 0x707462ull));
  for (int label = 0; label < 2; ++label) {
    for (size_t i = 0; i < per_class[label]; ++i) {
      ds.records.push_back(make_beat(label, true, input_length, rng));
    }
  }
  return ds;
}

}  // namespace ecg
