#include "ecg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecg/errors.hpp"

namespace ecg {

ParamTensor ParamTensor::zeros(std::string name, std::vector<int> shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor '" + name + "': non-positive dim");
    n *= static_cast<size_t>(d);
  }
  ParamTensor t;
  t.name = std::move(name);
  t.shape = std::move(shape);
  t.values.assign(n, 0.0f);
  t.grad.assign(n, 0.0f);
  t.m.assign(n, 0.0f);
  t.v.assign(n, 0.0f);
  return t;
}

void require_finite(std::span<const float> values, const char* what) {
  for (float x : values) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string(what) + ": non-finite value");
    }
  }
}

float dot_f32(const float* a, const float* b, int n) {
  float s0 = 0.0f, s1 = 0.0f, s2 = 0.0f, s3 = 0.0f;
  int t = 0;
  for (; t + 4 <= n; t += 4) {
    s0 += a[t] * b[t];
    s1 += a[t + 1] * b[t + 1];
    s2 += a[t + 2] * b[t + 2];
    s3 += a[t + 3] * b[t + 3];
  }
  for (; t < n; ++t) s0 += a[t] * b[t];
  return (s0 + s1) + (s2 + s3);
}

void axpy_f32(float alpha, const float* x, float* y, int n) {
  for (int t = 0; t < n; ++t) y[t] += alpha * x[t];
}

namespace {

struct ConvDims {
  int out_ch;
  int in_ch;
  int k;
  int pad;
};

ConvDims conv_dims(const Signal& in, const ParamTensor& w,
                   const ParamTensor& b) {
  if (w.shape.size() != 3) throw ShapeError("conv1d: weights must be rank 3");
  ConvDims d{w.shape[0], w.shape[1], w.shape[2], w.shape[2] / 2};
  if (d.k % 2 == 0) throw ShapeError("conv1d: kernel size must be odd");
  if (d.in_ch != in.channels) {
    throw ShapeError("conv1d: input has " + std::to_string(in.channels) +
                     " channels, weights expect " + std::to_string(d.in_ch));
  }
  if (b.shape.size() != 1 || b.shape[0] != d.out_ch) {
    throw ShapeError("conv1d: bias shape does not match output channels");
  }
  return d;
}

}  // namespace

void conv1d_forward(const Signal& in, const ParamTensor& weights,
                    const ParamTensor& bias, Signal& out) {
  const ConvDims d = conv_dims(in, weights, bias);
  require_finite(in.values, "conv1d input");
  const int len = in.length;
  out.resize(d.out_ch, len);
  for (int oc = 0; oc < d.out_ch; ++oc) {
    float* dst = out.row(oc);
    std::fill(dst, dst + len, bias.values[oc]);
    const float* woc = weights.values.data() +
                       static_cast<size_t>(oc) * d.in_ch * d.k;
    for (int ic = 0; ic < d.in_ch; ++ic) {
      const float* src = in.row(ic);
      for (int kk = 0; kk < d.k; ++kk) {
        const float wv = woc[ic * d.k + kk];
        const int off = kk - d.pad;
        const int t0 = std::max(0, -off);
        const int t1 = std::min(len, len - off);
        axpy_f32(wv, src + off + t0, dst + t0, t1 - t0);
      }
    }
  }
}

void conv1d_backward(const Signal& in, ParamTensor& weights, ParamTensor& bias,
                     const Signal& grad_out, Signal* grad_in) {
  const ConvDims d = conv_dims(in, weights, bias);
  if (grad_out.channels != d.out_ch || grad_out.length != in.length) {
    throw ShapeError("conv1d backward: grad_out shape mismatch");
  }
  const int len = in.length;
  for (int oc = 0; oc < d.out_ch; ++oc) {
    const float* g = grad_out.row(oc);
    float acc = 0.0f;
    for (int t = 0; t < len; ++t) acc += g[t];
    bias.grad[oc] += acc;

    float* dwoc = weights.grad.data() + static_cast<size_t>(oc) * d.in_ch * d.k;
    const float* woc =
        weights.values.data() + static_cast<size_t>(oc) * d.in_ch * d.k;
    for (int ic = 0; ic < d.in_ch; ++ic) {
      const float* src = in.row(ic);
      float* dxi = grad_in ? grad_in->row(ic) : nullptr;
      for (int kk = 0; kk < d.k; ++kk) {
        const int off = kk - d.pad;
        const int t0 = std::max(0, -off);
        const int t1 = std::min(len, len - off);
        dwoc[ic * d.k + kk] += dot_f32(g + t0, src + off + t0, t1 - t0);
        if (dxi) axpy_f32(woc[ic * d.k + kk], g + t0, dxi + off + t0, t1 - t0);
      }
    }
  }
}

Signal conv1d(const Signal& in, const ParamTensor& weights,
              const ParamTensor& bias) {
  Signal out;
  conv1d_forward(in, weights, bias, out);
  return out;
}

void maxpool1d_forward(const Signal& in, int window, int stride, Signal& out,
                       std::vector<int>& argmax) {
  if (window < 1 || stride < 1) throw ShapeError("maxpool1d: bad geometry");
  if (in.length < window) {
    throw ShapeError("maxpool1d: input length " + std::to_string(in.length) +
                     " shorter than window " + std::to_string(window));
  }
  const int out_len = (in.length - window) / stride + 1;
  out.resize(in.channels, out_len);
  argmax.assign(static_cast<size_t>(in.channels) * out_len, 0);
  for (int c = 0; c < in.channels; ++c) {
    const float* src = in.row(c);
    float* dst = out.row(c);
    int* idx = argmax.data() + static_cast<size_t>(c) * out_len;
    for (int j = 0; j < out_len; ++j) {
      int best = j * stride;
      float best_v = src[best];
      for (int w = 1; w < window; ++w) {
        const int p = j * stride + w;
        if (src[p] > best_v) {
          best_v = src[p];
          best = p;
        }
      }
      dst[j] = best_v;
      idx[j] = best;
    }
  }
}

void maxpool1d_backward(const Signal& grad_out, const std::vector<int>& argmax,
                        Signal& grad_in) {
  if (argmax.size() != grad_out.size()) {
    throw ShapeError("maxpool1d backward: argmax map size mismatch");
  }
  for (int c = 0; c < grad_out.channels; ++c) {
    const float* g = grad_out.row(c);
    const int* idx = argmax.data() + static_cast<size_t>(c) * grad_out.length;
    float* dst = grad_in.row(c);
    for (int j = 0; j < grad_out.length; ++j) dst[idx[j]] += g[j];
  }
}

Signal maxpool1d(const Signal& in, int window, int stride) {
  Signal out;
  std::vector<int> argmax;
  maxpool1d_forward(in, window, stride, out, argmax);
  return out;
}

void relu_forward(const Signal& in, Signal& out) {
  out.resize(in.channels, in.length);
  for (size_t i = 0; i < in.values.size(); ++i) {
    out.values[i] = in.values[i] > 0.0f ? in.values[i] : 0.0f;
  }
}

void relu_backward(const Signal& in, const Signal& grad_out, Signal& grad_in) {
  for (size_t i = 0; i < in.values.size(); ++i) {
    if (in.values[i] > 0.0f) grad_in.values[i] += grad_out.values[i];
  }
}

Signal relu(const Signal& in) {
  Signal out;
  relu_forward(in, out);
  return out;
}

void dense_forward(std::span<const float> x, const ParamTensor& weights,
                   const ParamTensor& bias, std::span<float> out) {
  if (weights.shape.size() != 2) throw ShapeError("dense: weights must be rank 2");
  const int m = weights.shape[0];
  const int n = weights.shape[1];
  if (static_cast<int>(x.size()) != n) {
    throw ShapeError("dense: input size " + std::to_string(x.size()) +
                     " does not match weight columns " + std::to_string(n));
  }
  if (static_cast<int>(out.size()) != m || bias.shape[0] != m) {
    throw ShapeError("dense: output/bias size mismatch");
  }
  require_finite(x, "dense input");
  for (int i = 0; i < m; ++i) {
    out[i] = bias.values[i] +
             dot_f32(weights.values.data() + static_cast<size_t>(i) * n,
                     x.data(), n);
  }
}

void dense_backward(std::span<const float> x, ParamTensor& weights,
                    ParamTensor& bias, std::span<const float> grad_out,
                    std::span<float> grad_x) {
  const int m = weights.shape[0];
  const int n = weights.shape[1];
  if (static_cast<int>(grad_out.size()) != m ||
      static_cast<int>(x.size()) != n) {
    throw ShapeError("dense backward: shape mismatch");
  }
  for (int i = 0; i < m; ++i) {
    const float g = grad_out[i];
    bias.grad[i] += g;
    axpy_f32(g, x.data(), weights.grad.data() + static_cast<size_t>(i) * n, n);
    if (!grad_x.empty()) {
      axpy_f32(g, weights.values.data() + static_cast<size_t>(i) * n,
               grad_x.data(), n);
    }
  }
}

std::vector<float> dense(std::span<const float> x, const ParamTensor& weights,
                         const ParamTensor& bias) {
  std::vector<float> out(weights.shape[0]);
  dense_forward(x, weights, bias, out);
  return out;
}

float softmax_xent_inplace(std::span<const float> logits, int label,
                           std::span<float> probs, std::span<float> grad) {
  const int c = static_cast<int>(logits.size());
  if (label < 0 || label >= c) {
    throw DataError("softmax: label " + std::to_string(label) +
                    " out of range for " + std::to_string(c) + " classes");
  }
  float max_logit = logits[0];
  for (int i = 1; i < c; ++i) max_logit = std::max(max_logit, logits[i]);
  double sum = 0.0;
  for (int i = 0; i < c; ++i) {
    const float e = std::exp(logits[i] - max_logit);
    probs[i] = e;
    sum += e;
  }
  const float inv = static_cast<float>(1.0 / sum);
  for (int i = 0; i < c; ++i) probs[i] *= inv;
  const float loss = -static_cast<float>(
      static_cast<double>(logits[label]) - max_logit - std::log(sum));
  for (int i = 0; i < c; ++i) grad[i] = probs[i] - (i == label ? 1.0f : 0.0f);
  return loss;
}

void softmax_inplace(std::span<const float> logits, std::span<float> probs) {
  const int c = static_cast<int>(logits.size());
  float max_logit = logits[0];
  for (int i = 1; i < c; ++i) max_logit = std::max(max_logit, logits[i]);
  double sum = 0.0;
  for (int i = 0; i < c; ++i) {
    const float e = std::exp(logits[i] - max_logit);
    probs[i] = e;
    sum += e;
  }
  const float inv = static_cast<float>(1.0 / sum);
  for (int i = 0; i < c; ++i) probs[i] *= inv;
}

SoftmaxXent softmax_cross_entropy(std::span<const float> logits, int label) {
  SoftmaxXent r;
  r.probs.resize(logits.size());
  r.grad.resize(logits.size());
  r.loss = softmax_xent_inplace(logits, label, r.probs, r.grad);
  return r;
}

void adam_step(ParamTensor& param, const OptimizerConfig& cfg) {
  require_finite(param.grad, ("adam: gradient of " + param.name).c_str());
  ++param.step_count;
  const double t = static_cast<double>(param.step_count);
  const float inv_bc1 =
      static_cast<float>(1.0 / (1.0 - std::pow(cfg.beta1, t)));
  const float inv_bc2 =
      static_cast<float>(1.0 / (1.0 - std::pow(cfg.beta2, t)));
  const float b1 = cfg.beta1;
  const float b2 = cfg.beta2;
  const float lr = cfg.learning_rate;
  const float eps = cfg.epsilon;
  for (size_t i = 0; i < param.values.size(); ++i) {
    const float g = param.grad[i];
    param.m[i] = b1 * param.m[i] + (1.0f - b1) * g;
    param.v[i] = b2 * param.v[i] + (1.0f - b2) * g * g;
    const float m_hat = param.m[i] * inv_bc1;
    const float v_hat = param.v[i] * inv_bc2;
    param.values[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
  require_finite(param.values, ("adam: values of " + param.name).c_str());
  param.zero_grad();
}

}  // namespace ecg
