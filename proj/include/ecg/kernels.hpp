#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ecg {

// 1-D multichannel signal. Values are row-major [channel][position].
struct Signal {
  int channels = 0;
  int length = 0;
  std::vector<float> values;

  Signal() = default;
  Signal(int c, int len)
      : channels(c), length(len), values(static_cast<size_t>(c) * len, 0.0f) {}

  float* row(int c) { return values.data() + static_cast<size_t>(c) * length; }
  const float* row(int c) const {
    return values.data() + static_cast<size_t>(c) * length;
  }
  float& at(int c, int t) { return values[static_cast<size_t>(c) * length + t]; }
  float at(int c, int t) const {
    return values[static_cast<size_t>(c) * length + t];
  }
  size_t size() const { return values.size(); }

  void resize(int c, int len) {
    channels = c;
    length = len;
    values.assign(static_cast<size_t>(c) * len, 0.0f);
  }
  void zero() { std::fill(values.begin(), values.end(), 0.0f); }
};

// Trainable tensor: value, gradient, and adaptive-moment state, all f32.
struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;
  std::vector<float> grad;
  std::vector<float> m;
  std::vector<float> v;
  int64_t step_count = 0;
  bool trainable = true;

  static ParamTensor zeros(std::string name, std::vector<int> shape);
  size_t size() const { return values.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }
};

struct OptimizerConfig {
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

// Contiguous dot / axpy used by every layer. Four accumulators give ILP
// without reassociating under fast-math flags, so results stay deterministic.
float dot_f32(const float* a, const float* b, int n);
void axpy_f32(float alpha, const float* x, float* y, int n);

// ---- conv1d ----
// weights [out_ch][in_ch][k], odd k, stride 1, zero same-padding,
// cross-correlation (no kernel flip). Output length equals input length.
void conv1d_forward(const Signal& in, const ParamTensor& weights,
                    const ParamTensor& bias, Signal& out);
// Accumulates weight/bias grads; accumulates into grad_in when non-null.
void conv1d_backward(const Signal& in, ParamTensor& weights, ParamTensor& bias,
                     const Signal& grad_out, Signal* grad_in);
Signal conv1d(const Signal& in, const ParamTensor& weights,
              const ParamTensor& bias);

// ---- maxpool1d ----
// Incomplete trailing window is dropped; ties go to the first index.
void maxpool1d_forward(const Signal& in, int window, int stride, Signal& out,
                       std::vector<int>& argmax);
void maxpool1d_backward(const Signal& grad_out, const std::vector<int>& argmax,
                        Signal& grad_in);
Signal maxpool1d(const Signal& in, int window = 2, int stride = 2);

// ---- relu ----
void relu_forward(const Signal& in, Signal& out);
// Subgradient at 0 is 0: gradient passes only where input > 0.
void relu_backward(const Signal& in, const Signal& grad_out, Signal& grad_in);
Signal relu(const Signal& in);

// ---- dense ----
// weights [m][n] row-major, out = W.x + b.
void dense_forward(std::span<const float> x, const ParamTensor& weights,
                   const ParamTensor& bias, std::span<float> out);
// grad_x may be empty when the input gradient is not needed.
void dense_backward(std::span<const float> x, ParamTensor& weights,
                    ParamTensor& bias, std::span<const float> grad_out,
                    std::span<float> grad_x);
std::vector<float> dense(std::span<const float> x, const ParamTensor& weights,
                         const ParamTensor& bias);

// ---- softmax cross-entropy ----
struct SoftmaxXent {
  std::vector<float> probs;
  float loss = 0.0f;
  std::vector<float> grad;  // probs - onehot(label)
};
SoftmaxXent softmax_cross_entropy(std::span<const float> logits, int label);
// In-place flavor used by the training loop; returns the loss.
float softmax_xent_inplace(std::span<const float> logits, int label,
                           std::span<float> probs, std::span<float> grad);
// Probabilities only (max-subtracted), for inference paths.
void softmax_inplace(std::span<const float> logits, std::span<float> probs);

// ---- optimizer ----
// One adaptive-moment update with bias correction; clears the gradient.
void adam_step(ParamTensor& param, const OptimizerConfig& cfg);

// Throws NumericError when any element is not finite.
void require_finite(std::span<const float> values, const char* what);

}  // namespace ecg
