#include "ecg/model.hpp"

#include <algorithm>
#include <cmath>

#include "ecg/errors.hpp"
#include "ecg/rng.hpp"

namespace ecg {

namespace {

LayerSpec conv_layer(int filters, int kernel) {
  LayerSpec l{LayerKind::conv};
  l.filters = filters;
  l.kernel = kernel;
  return l;
}

LayerSpec block_layer(int filters) {
  LayerSpec l{LayerKind::residual_block};
  l.filters = filters;
  return l;
}

LayerSpec dense_layer(int units) {
  LayerSpec l{LayerKind::dense};
  l.units = units;
  return l;
}

LayerSpec pool_layer() {
  LayerSpec l{LayerKind::maxpool};
  l.window = 2;
  l.stride = 2;
  return l;
}

void append_head(std::vector<LayerSpec>& layers, int n_classes) {
  layers.push_back(LayerSpec{LayerKind::flatten});
  layers.push_back(dense_layer(32));
  layers.push_back(LayerSpec{LayerKind::relu});
  layers.push_back(dense_layer(n_classes));
}

std::vector<std::string> resolve_labels(int n_classes,
                                        std::vector<std::string> names) {
  if (names.empty()) return default_label_names(n_classes);
  if (static_cast<int>(names.size()) != n_classes) {
    throw ShapeError("label name count does not match class count");
  }
  return names;
}

}  // namespace

std::vector<std::string> default_label_names(int n_classes) {
  if (n_classes == 5) {
    return {"Normal", "Supraventricular", "Ventricular", "Fusion Beat",
            "Unknown"};
  }
  if (n_classes == 2) return {"Normal", "Abnormal"};
  std::vector<std::string> names;
  names.reserve(n_classes);
  for (int i = 0; i < n_classes; ++i) names.push_back("class_" + std::to_string(i));
  return names;
}

ModelSpec original_spec(int input_length, int n_classes,
                        std::vector<std::string> label_names) {
  ModelSpec spec;
  spec.name = "original";
  spec.input_length = input_length;
  spec.n_classes = n_classes;
  spec.label_names = resolve_labels(n_classes, std::move(label_names));
  spec.layers.push_back(conv_layer(16, 3));
  spec.layers.push_back(LayerSpec{LayerKind::relu});
  for (int f : {16, 32, 64, 128, 256}) spec.layers.push_back(block_layer(f));
  append_head(spec.layers, n_classes);
  return spec;
}

ModelSpec modified_spec(int input_length, int n_classes,
                        std::vector<std::string> label_names) {
  ModelSpec spec;
  spec.name = "modified";
  spec.input_length = input_length;
  spec.n_classes = n_classes;
  spec.label_names = resolve_labels(n_classes, std::move(label_names));
  for (int f : {16, 32, 64}) spec.layers.push_back(block_layer(f));
  append_head(spec.layers, n_classes);
  return spec;
}

int counted_convs(const ModelSpec& spec) {
  int n = 0;
  for (const LayerSpec& l : spec.layers) {
    if (l.kind == LayerKind::conv) n += 1;
    if (l.kind == LayerKind::residual_block) n += 2;
  }
  return n;
}

// ---- Network ----

Network Network::build(const ModelSpec& spec, uint64_t seed) {
  Network net;
  net.spec_ = spec;
  net.compile();
  net.init_weights(seed);
  return net;
}

ParamTensor* Network::find_tensor(std::string_view name) {
  for (ParamTensor& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const ParamTensor* Network::find_tensor(std::string_view name) const {
  return const_cast<Network*>(this)->find_tensor(name);
}

size_t Network::parameter_count() const {
  size_t n = 0;
  for (const ParamTensor& t : tensors_) n += t.size();
  return n;
}

void Network::compile() {
  nodes_.clear();
  buffers_.clear();
  tensors_.clear();
  n_pool_nodes_ = 0;
  last_dense_node_ = -1;
  if (spec_.input_length < 1) throw ShapeError("input length must be positive");
  buffers_.push_back({1, spec_.input_length});

  int cur = 0;          // current buffer id
  bool flat = false;    // a flatten layer has been crossed
  int conv_ordinal = 0;
  int block_ordinal = 0;
  int dense_ordinal = 0;

  auto new_buffer = [&](int ch, int len) {
    buffers_.push_back({ch, len});
    return static_cast<int>(buffers_.size()) - 1;
  };
  auto add_tensor = [&](ParamTensor t) {
    tensors_.push_back(std::move(t));
    return static_cast<int>(tensors_.size()) - 1;
  };
  auto add_conv = [&](const std::string& prefix, int in_buf, int filters,
                      int kernel) {
    const BufferShape in = buffers_[in_buf];
    Node n{Node::Op::conv};
    n.in0 = in_buf;
    n.weights = add_tensor(
        ParamTensor::zeros(prefix + ".weight", {filters, in.channels, kernel}));
    n.bias = add_tensor(ParamTensor::zeros(prefix + ".bias", {filters}));
    n.out = new_buffer(filters, in.length);
    nodes_.push_back(n);
    return n.out;
  };
  auto add_relu = [&](int in_buf) {
    Node n{Node::Op::relu};
    n.in0 = in_buf;
    n.out = new_buffer(buffers_[in_buf].channels, buffers_[in_buf].length);
    nodes_.push_back(n);
    return n.out;
  };
  auto add_pool = [&](int in_buf, int window, int stride) {
    const BufferShape in = buffers_[in_buf];
    if (in.length < window) {
      throw ShapeError("model: length " + std::to_string(in.length) +
                       " too short to pool (input too short for the stack)");
    }
    Node n{Node::Op::maxpool};
    n.in0 = in_buf;
    n.window = window;
    n.stride = stride;
    n.pool_slot = n_pool_nodes_++;
    n.out = new_buffer(in.channels, (in.length - window) / stride + 1);
    nodes_.push_back(n);
    return n.out;
  };
  auto add_add = [&](int a, int b) {
    Node n{Node::Op::add};
    n.in0 = a;
    n.in1 = b;
    n.out = new_buffer(buffers_[a].channels, buffers_[a].length);
    nodes_.push_back(n);
    return n.out;
  };

  for (const LayerSpec& layer : spec_.layers) {
    switch (layer.kind) {
      case LayerKind::conv: {
        ++conv_ordinal;
        const std::string prefix =
            conv_ordinal == 1 && block_ordinal == 0
                ? "stem.conv"
                : "conv" + std::to_string(conv_ordinal);
        cur = add_conv(prefix, cur, layer.filters, layer.kernel);
        break;
      }
      case LayerKind::relu:
        cur = add_relu(cur);
        break;
      case LayerKind::maxpool:
        cur = add_pool(cur, layer.window, layer.stride);
        break;
      case LayerKind::residual_block: {
        ++block_ordinal;
        const std::string prefix = "block" + std::to_string(block_ordinal);
        const int block_in = cur;
        const int f = layer.filters;
        int c = add_conv(prefix + ".conv1", block_in, f, 3);
        c = add_relu(c);
        c = add_conv(prefix + ".conv2", c, f, 3);
        int shortcut = block_in;
        if (buffers_[block_in].channels != f) {
          shortcut = add_conv(prefix + ".shortcut", block_in, f, 1);
        }
        c = add_add(c, shortcut);
        c = add_relu(c);
        cur = add_pool(c, 2, 2);
        break;
      }
      case LayerKind::flatten:
        flat = true;  // buffers are contiguous; nothing to move
        break;
      case LayerKind::dense: {
        if (!flat && buffers_[cur].length != 1) {
          throw ShapeError("model: dense layer before flatten");
        }
        ++dense_ordinal;
        const BufferShape in = buffers_[cur];
        const int n_in = in.channels * in.length;
        Node n{Node::Op::dense};
        n.in0 = cur;
        const std::string prefix = "head.fc" + std::to_string(dense_ordinal);
        n.weights = add_tensor(
            ParamTensor::zeros(prefix + ".weight", {layer.units, n_in}));
        n.bias = add_tensor(ParamTensor::zeros(prefix + ".bias", {layer.units}));
        n.out = new_buffer(layer.units, 1);
        last_dense_node_ = static_cast<int>(nodes_.size());
        nodes_.push_back(n);
        cur = n.out;
        break;
      }
    }
  }
  if (last_dense_node_ < 0) throw ShapeError("model: no dense output layer");
  if (buffers_[cur].channels != spec_.n_classes) {
    throw ShapeError("model: final layer width does not match class count");
  }
}

void Network::init_weights(uint64_t seed) {
  SplitMix64 rng(mix_seed(seed, 0x6d6f64656cull));  // weight-init stream
  for (ParamTensor& t : tensors_) {
    if (t.shape.size() == 1) continue;  // biases start at zero
    // He-uniform, fan-in based: limit = sqrt(6 / fan_in).
    size_t fan_in = 1;
    for (size_t i = 1; i < t.shape.size(); ++i) {
      fan_in *= static_cast<size_t>(t.shape[i]);
    }
    const float limit = std::sqrt(6.0f / static_cast<float>(fan_in));
    for (float& v : t.values) v = rng.uniform(-limit, limit);
  }
}

Workspace Network::make_workspace() const {
  Workspace ws;
  ws.act.resize(buffers_.size());
  ws.grad.resize(buffers_.size());
  for (size_t i = 0; i < buffers_.size(); ++i) {
    ws.act[i].resize(buffers_[i].channels, buffers_[i].length);
    ws.grad[i].resize(buffers_[i].channels, buffers_[i].length);
  }
  ws.pool_argmax.resize(n_pool_nodes_);
  return ws;
}

std::span<const float> Network::forward(Workspace& ws,
                                        std::span<const float> beat) const {
  if (static_cast<int>(beat.size()) != spec_.input_length) {
    throw ShapeError("forward: beat has " + std::to_string(beat.size()) +
                     " samples, model expects " +
                     std::to_string(spec_.input_length));
  }
  std::copy(beat.begin(), beat.end(), ws.act[0].values.begin());
  for (const Node& n : nodes_) {
    switch (n.op) {
      case Node::Op::conv:
        conv1d_forward(ws.act[n.in0], tensors_[n.weights], tensors_[n.bias],
                       ws.act[n.out]);
        break;
      case Node::Op::relu:
        relu_forward(ws.act[n.in0], ws.act[n.out]);
        break;
      case Node::Op::maxpool:
        maxpool1d_forward(ws.act[n.in0], n.window, n.stride, ws.act[n.out],
                          ws.pool_argmax[n.pool_slot]);
        break;
      case Node::Op::add: {
        const Signal& a = ws.act[n.in0];
        const Signal& b = ws.act[n.in1];
        Signal& out = ws.act[n.out];
        for (size_t i = 0; i < out.values.size(); ++i) {
          out.values[i] = a.values[i] + b.values[i];
        }
        break;
      }
      case Node::Op::dense:
        dense_forward(ws.act[n.in0].values, tensors_[n.weights],
                      tensors_[n.bias], ws.act[n.out].values);
        break;
    }
  }
  return ws.act[nodes_.back().out].values;
}

int Network::first_trainable_node() const {
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.weights >= 0 && tensors_[n.weights].trainable) {
      return static_cast<int>(i);
    }
  }
  return static_cast<int>(nodes_.size()) - 1;
}

void Network::backward(Workspace& ws, std::span<const float> logit_grad) {
  const int cut = first_trainable_node();
  for (Signal& g : ws.grad) g.zero();
  Signal& out_grad = ws.grad[nodes_.back().out];
  if (logit_grad.size() != out_grad.values.size()) {
    throw ShapeError("backward: logit gradient width mismatch");
  }
  std::copy(logit_grad.begin(), logit_grad.end(), out_grad.values.begin());

  for (int i = static_cast<int>(nodes_.size()) - 1; i >= cut; --i) {
    const Node& n = nodes_[i];
    const bool need_dx = i > cut;
    switch (n.op) {
      case Node::Op::conv:
        conv1d_backward(ws.act[n.in0], tensors_[n.weights], tensors_[n.bias],
                        ws.grad[n.out], need_dx ? &ws.grad[n.in0] : nullptr);
        break;
      case Node::Op::relu:
        relu_backward(ws.act[n.in0], ws.grad[n.out], ws.grad[n.in0]);
        break;
      case Node::Op::maxpool:
        maxpool1d_backward(ws.grad[n.out], ws.pool_argmax[n.pool_slot],
                           ws.grad[n.in0]);
        break;
      case Node::Op::add: {
        const Signal& g = ws.grad[n.out];
        Signal& a = ws.grad[n.in0];
        Signal& b = ws.grad[n.in1];
        for (size_t j = 0; j < g.values.size(); ++j) {
          a.values[j] += g.values[j];
          b.values[j] += g.values[j];
        }
        break;
      }
      case Node::Op::dense: {
        std::span<float> dx;
        if (need_dx) dx = ws.grad[n.in0].values;
        dense_backward(ws.act[n.in0].values, tensors_[n.weights],
                       tensors_[n.bias], ws.grad[n.out].values, dx);
        break;
      }
    }
  }
}

double Network::batch_backward(Workspace& ws, const float* const* beats,
                               const int* labels, int n, int* correct) {
  if (n < 1) throw DataError("batch_backward: empty batch");
  for (ParamTensor& t : tensors_) t.zero_grad();
  const int c = spec_.n_classes;
  std::vector<float> probs(c);
  std::vector<float> grad(c);
  const float scale = 1.0f / static_cast<float>(n);
  double loss_sum = 0.0;
  int hits = 0;
  for (int s = 0; s < n; ++s) {
    std::span<const float> logits =
        forward(ws, std::span<const float>(beats[s], spec_.input_length));
    loss_sum += softmax_xent_inplace(logits, labels[s], probs, grad);
    int best = 0;
    for (int i = 1; i < c; ++i) {
      if (logits[i] > logits[best]) best = i;
    }
    if (best == labels[s]) ++hits;
    for (int i = 0; i < c; ++i) grad[i] *= scale;
    backward(ws, grad);
  }
  if (correct) *correct = hits;
  return loss_sum / n;
}

bool Network::is_head_tensor(const ParamTensor& t) const {
  return t.name.rfind("head.", 0) == 0;
}

void Network::set_feature_frozen(bool frozen) {
  for (ParamTensor& t : tensors_) {
    t.trainable = is_head_tensor(t) ? true : !frozen;
  }
}

void Network::replace_head(int new_n_classes,
                           std::vector<std::string> label_names,
                           uint64_t seed) {
  if (new_n_classes < 1) throw ShapeError("replace_head: bad class count");
  Node& n = nodes_[last_dense_node_];
  ParamTensor& w = tensors_[n.weights];
  ParamTensor& b = tensors_[n.bias];
  const int n_in = w.shape[1];

  ParamTensor new_w = ParamTensor::zeros(w.name, {new_n_classes, n_in});
  ParamTensor new_b = ParamTensor::zeros(b.name, {new_n_classes});
  SplitMix64 rng(mix_seed(seed, 0x68656164ull));  // head-init stream
  const float limit = std::sqrt(6.0f / static_cast<float>(n_in));
  for (float& v : new_w.values) v = rng.uniform(-limit, limit);
  new_w.trainable = w.trainable;
  new_b.trainable = b.trainable;
  w = std::move(new_w);
  b = std::move(new_b);

  buffers_[n.out].channels = new_n_classes;
  spec_.n_classes = new_n_classes;
  spec_.label_names = resolve_labels(new_n_classes, std::move(label_names));
  for (auto it = spec_.layers.rbegin(); it != spec_.layers.rend(); ++it) {
    if (it->kind == LayerKind::dense) {
      it->units = new_n_classes;
      break;
    }
  }
}

std::vector<std::vector<float>> Network::snapshot_values() const {
  std::vector<std::vector<float>> snap;
  snap.reserve(tensors_.size());
  for (const ParamTensor& t : tensors_) snap.push_back(t.values);
  return snap;
}

void Network::restore_values(const std::vector<std::vector<float>>& snapshot) {
  if (snapshot.size() != tensors_.size()) {
    throw ShapeError("restore_values: snapshot tensor count mismatch");
  }
  for (size_t i = 0; i < tensors_.size(); ++i) {
    if (snapshot[i].size() != tensors_[i].values.size()) {
      throw ShapeError("restore_values: tensor size mismatch");
    }
    tensors_[i].values = snapshot[i];
  }
}

}  // namespace ecg
