#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecg/kernels.hpp"

namespace ecg {

enum class LayerKind { conv, relu, maxpool, residual_block, flatten, dense };

struct LayerSpec {
  LayerKind kind;
  int filters = 0;  // conv, residual_block
  int kernel = 0;   // conv
  int units = 0;    // dense
  int window = 0;   // maxpool
  int stride = 0;   // maxpool
};

struct ModelSpec {
  std::string name;  // "original" | "modified"
  int input_length = 187;
  int n_classes = 5;
  std::vector<LayerSpec> layers;
  std::vector<std::string> label_names;
};

// Layer graphs. The original stacks an initial 16-filter conv on five
// residual blocks (16,32,64,128,256); the modified keeps three blocks
// (16,32,64). Both end in flatten -> dense(32) -> relu -> dense(n_classes).
ModelSpec original_spec(int input_length, int n_classes,
                        std::vector<std::string> label_names = {});
ModelSpec modified_spec(int input_length, int n_classes,
                        std::vector<std::string> label_names = {});

// Counted convolutions: standalone convs plus two per residual block.
// Projection shortcuts inside blocks are excluded.
int counted_convs(const ModelSpec& spec);

std::vector<std::string> default_label_names(int n_classes);

// Per-buffer activation storage for one in-flight sample. Forward is
// read-only on the network, so concurrent evaluation uses one workspace
// per thread.
struct Workspace {
  std::vector<Signal> act;
  std::vector<Signal> grad;
  std::vector<std::vector<int>> pool_argmax;
};

// A ModelSpec compiled to primitive nodes with concrete shapes plus the
// trainable tensors. Residual blocks expand to conv/relu/add/pool nodes;
// flatten folds away because buffers are already contiguous.
class Network {
 public:
  static Network build(const ModelSpec& spec, uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  std::vector<ParamTensor>& tensors() { return tensors_; }
  const std::vector<ParamTensor>& tensors() const { return tensors_; }
  ParamTensor* find_tensor(std::string_view name);
  const ParamTensor* find_tensor(std::string_view name) const;
  size_t parameter_count() const;
  int n_classes() const { return spec_.n_classes; }
  int input_length() const { return spec_.input_length; }

  Workspace make_workspace() const;

  // Returns the logits (valid until the next forward on this workspace).
  std::span<const float> forward(Workspace& ws,
                                 std::span<const float> beat) const;

  // Injects d(loss)/d(logits) at the output and accumulates parameter
  // gradients. Requires a preceding forward on the same workspace.
  void backward(Workspace& ws, std::span<const float> logit_grad);

  // Mean cross-entropy over a batch; parameter grads are zeroed first and
  // hold the mean-loss gradient afterwards. Returns the number of argmax
  // hits through `correct` when non-null.
  double batch_backward(Workspace& ws, const float* const* beats,
                        const int* labels, int n, int* correct = nullptr);

  // Swaps the final dense layer for a freshly initialized one; every other
  // tensor is left untouched.
  void replace_head(int new_n_classes, std::vector<std::string> label_names,
                    uint64_t seed);

  // Marks every tensor outside the dense head as (un)trainable.
  void set_feature_frozen(bool frozen);
  bool is_head_tensor(const ParamTensor& t) const;

  std::vector<std::vector<float>> snapshot_values() const;
  void restore_values(const std::vector<std::vector<float>>& snapshot);

 private:
  struct Node {
    enum class Op { conv, relu, maxpool, add, dense } op;
    int in0 = -1;
    int in1 = -1;  // add only
    int out = -1;
    int weights = -1;
    int bias = -1;
    int window = 0;
    int stride = 0;
    int pool_slot = -1;
  };
  struct BufferShape {
    int channels = 0;
    int length = 0;
  };

  void compile();
  void init_weights(uint64_t seed);
  int first_trainable_node() const;

  ModelSpec spec_;
  std::vector<Node> nodes_;
  std::vector<BufferShape> buffers_;
  std::vector<ParamTensor> tensors_;
  int n_pool_nodes_ = 0;
  int last_dense_node_ = -1;
};

}  // namespace ecg
