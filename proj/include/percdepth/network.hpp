#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "percdepth/ops.hpp"
#include "percdepth/tensor.hpp"

namespace percdepth::nn {

enum class LayerKind { conv, conv_norm, res_block, maxpool, upsample, concat, add, activation };

std::string to_string(LayerKind k);

// One row of an architecture table. `inputs` names earlier rows; "I" is the
// network input.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::conv;
  int kernel = 0;
  int stride = 1;
  int channels = 0;
  ops::Activation activation = ops::Activation::linear;
  std::vector<std::string> inputs;
};

struct NetScale {
  double width_multiplier = 1.0;
  int input_size = 256;

  void validate() const;
  int channels(int base) const;
};

enum class Role { generator_Y, generator_X, critic_Y, critic_X, other };

std::string to_string(Role r);
Role role_from_string(const std::string& s);

struct Param {
  std::string name;
  Tensor value;
};

// Primitive operation the table rows expand into.
struct Node {
  enum class Op { input, conv, norm, act, maxpool, upsample, concat, add };
  Op op = Op::input;
  std::string name;
  std::vector<int> inputs;
  int kernel = 0;
  int stride = 1;
  int channels = 0;
  ops::Activation act = ops::Activation::linear;
  int weight = -1;
  int bias = -1;
  int scale = -1;
  int shift = -1;
};

struct InitOptions {
  std::uint64_t seed = 0;
  // Zero the output convolution so an untrained generator emits tanh(0) = 0.
  bool zero_head = true;
};

class Network {
 public:
  Network(Role role, NetScale scale, int in_channels, std::vector<LayerSpec> table);

  Role role() const { return role_; }
  const NetScale& scale() const { return scale_; }
  int in_channels() const { return in_channels_; }
  const std::vector<LayerSpec>& table() const { return table_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  int node_index(const std::string& name) const;
  int output_node() const { return static_cast<int>(nodes_.size()) - 1; }
  int param_index(const std::string& name) const;

  void initialize(const InitOptions& opts);
  std::size_t param_count() const;

 private:
  int add_node(Node node);
  int add_param(const std::string& name, Shape shape);
  int expand_conv(const std::string& name, int input, int in_ch, int k, int s, int c, bool norm,
                  ops::Activation act);

  Role role_;
  NetScale scale_;
  int in_channels_;
  std::vector<LayerSpec> table_;
  std::vector<Node> nodes_;
  std::vector<Param> params_;
  std::vector<int> node_channels_;
};

// Generator table (ResNet18 encoder, nearest-neighbour decoder with skips).
// out_channels == 1 maps RGB to depth, out_channels == 3 maps depth to RGB.
Network build_generator(const NetScale& scale, int out_channels, const InitOptions& init = {});
// PatchGAN critic: 13 kernel-4 convolutions, no normalization.
Network build_critic(const NetScale& scale, int in_channels, const InitOptions& init = {});
// A network consisting of a single residual block row.
Network build_residual_block(int in_channels, int kernel, int stride, int channels,
                             const InitOptions& init = {});

std::vector<LayerSpec> generator_table(const NetScale& scale, int out_channels);
std::vector<LayerSpec> critic_table(const NetScale& scale);
// The sub-layers a res-block row expands into (con1, con2, skip, add, O).
// con2 always has stride 1 so the main path and the skip agree in size.
std::vector<LayerSpec> residual_block_table(int kernel, int stride, int channels);

std::size_t param_count(const Network& net);

// Gradient buffers aligned with Network::params().
using Gradients = std::vector<Tensor>;
Gradients zero_gradients(const Network& net);

struct Trace {
  std::vector<Tensor> values;
  std::vector<ops::NormStats> norm;
  std::vector<std::vector<int>> argmax;
  int last = 0;

  const Tensor& output() const { return values[last]; }
};

// Evaluates nodes up to and including `stop_node` (default: the output).
Trace forward_trace(const Network& net, const Tensor& x, int stop_node = -1);
Tensor forward(const Network& net, const Tensor& x);

// Back-propagates `grad_out` (gradient w.r.t. trace.output()) and returns the
// gradient w.r.t. the network input. Parameter gradients are accumulated into
// `grads` when it is non-null. `node_grads`, when non-null, receives the
// gradient w.r.t. every node output (empty where unreachable).
Tensor backward(const Network& net, const Trace& trace, const Tensor& grad_out,
                Gradients* grads, std::vector<Tensor>* node_grads = nullptr);

// Second-to-last critic layer (con12), post-activation.
int feature_node(const Network& critic);
Tensor critic_features(const Network& critic, const Tensor& x);

// Per-sample critic score: the patch map averaged over its cells.
std::vector<double> critic_scores(const Tensor& patch_map);
// Gradient of sum_n weight[n] * score_n w.r.t. the patch map.
Tensor score_gradient(const Shape& patch_shape, std::span<const double> weights);

// For conv / piecewise-linear activation chains (the critic): accumulates the
// parameter gradient of <tangent, d score / d input>, given the trace at the
// input, the per-node gradients of the score, and the input-space tangent.
// The activation masks are locally constant, so only the convolution weights
// receive a contribution.
void accumulate_input_gradient_vjp(const Network& net, const Trace& trace,
                                   const std::vector<Tensor>& node_grads, const Tensor& tangent,
                                   Gradients& grads);

}  // namespace percdepth::nn
