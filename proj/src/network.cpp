#include "percdepth/network.hpp"

#include <cmath>
#include <random>
#include <unordered_map>

namespace percdepth::nn {

using ops::Activation;

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "convolution";
    case LayerKind::conv_norm: return "conv-norm";
    case LayerKind::res_block: return "res-block";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::upsample: return "upsampling";
    case LayerKind::concat: return "concatenate";
    case LayerKind::add: return "addition";
    case LayerKind::activation: return "activation";
  }
  return "?";
}

std::string to_string(Role r) {
  switch (r) {
    case Role::generator_Y: return "generator_Y";
    case Role::generator_X: return "generator_X";
    case Role::critic_Y: return "critic_Y";
    case Role::critic_X: return "critic_X";
    case Role::other: return "other";
  }
  return "other";
}

Role role_from_string(const std::string& s) {
  for (Role r : {Role::generator_Y, Role::generator_X, Role::critic_Y, Role::critic_X}) {
    if (to_string(r) == s) return r;
  }
  return Role::other;
}

void NetScale::validate() const {
  if (!(width_multiplier > 0.0 && width_multiplier <= 1.0)) {
    throw ConfigError("width_multiplier must lie in (0, 1]");
  }
  if (input_size <= 0 || input_size % 32 != 0) {
    throw ConfigError("input_size must be a positive multiple of 32, got " +
                      std::to_string(input_size));
  }
}

int NetScale::channels(int base) const {
  return std::max(1, static_cast<int>(std::lround(base * width_multiplier)));
}

Network::Network(Role role, NetScale scale, int in_channels, std::vector<LayerSpec> table)
    : role_(role), scale_(scale), in_channels_(in_channels), table_(std::move(table)) {
  Node input;
  input.op = Node::Op::input;
  input.name = "I";
  input.channels = in_channels;
  add_node(std::move(input));

  std::unordered_map<std::string, int> row_out{{"I", 0}};
  auto resolve = [&](const LayerSpec& row, std::size_t i) {
    if (i >= row.inputs.size()) throw ConfigError("layer " + row.name + " is missing an input");
    auto it = row_out.find(row.inputs[i]);
    if (it == row_out.end()) {
      throw ConfigError("layer " + row.name + " references unknown input " + row.inputs[i]);
    }
    return it->second;
  };

  for (auto& row : table_) {
    if (row_out.count(row.name)) throw ConfigError("duplicate layer name " + row.name);
    int out = -1;
    switch (row.kind) {
      case LayerKind::conv:
      case LayerKind::conv_norm: {
        const int in = resolve(row, 0);
        out = expand_conv(row.name, in, node_channels_[in], row.kernel, row.stride, row.channels,
                          row.kind == LayerKind::conv_norm, row.activation);
        break;
      }
      case LayerKind::res_block: {
        const int in = resolve(row, 0);
        const int cin = node_channels_[in];
        const int c1 = expand_conv(row.name + "/con1", in, cin, row.kernel, row.stride,
                                   row.channels, true, Activation::relu);
        // Only the first main-path convolution strides; the skip path strides once too.
        const int c2 = expand_conv(row.name + "/con2", c1, row.channels, row.kernel, 1,
                                   row.channels, true, Activation::linear);
        const int sk = expand_conv(row.name + "/skip", in, cin, 1, row.stride, row.channels, true,
                                   Activation::linear);
        Node add;
        add.op = Node::Op::add;
        add.name = row.name + "/add";
        add.inputs = {c2, sk};
        add.channels = row.channels;
        const int a = add_node(std::move(add));
        Node act;
        act.op = Node::Op::act;
        act.name = row.name;
        act.inputs = {a};
        act.act = row.activation;
        act.channels = row.channels;
        out = add_node(std::move(act));
        break;
      }
      case LayerKind::maxpool: {
        Node n;
        n.op = Node::Op::maxpool;
        n.name = row.name;
        n.inputs = {resolve(row, 0)};
        n.kernel = row.kernel;
        n.stride = row.stride;
        n.channels = node_channels_[n.inputs[0]];
        out = add_node(std::move(n));
        break;
      }
      case LayerKind::upsample: {
        Node n;
        n.op = Node::Op::upsample;
        n.name = row.name;
        n.inputs = {resolve(row, 0)};
        n.stride = row.stride;
        n.channels = node_channels_[n.inputs[0]];
        out = add_node(std::move(n));
        break;
      }
      case LayerKind::concat:
      case LayerKind::add: {
        Node n;
        n.op = row.kind == LayerKind::concat ? Node::Op::concat : Node::Op::add;
        n.name = row.name;
        n.inputs = {resolve(row, 0), resolve(row, 1)};
        const int ca = node_channels_[n.inputs[0]];
        const int cb = node_channels_[n.inputs[1]];
        if (n.op == Node::Op::add && ca != cb) {
          throw ConfigError("addition " + row.name + " has mismatched channels");
        }
        n.channels = n.op == Node::Op::concat ? ca + cb : ca;
        out = add_node(std::move(n));
        break;
      }
      case LayerKind::activation: {
        Node n;
        n.op = Node::Op::act;
        n.name = row.name;
        n.inputs = {resolve(row, 0)};
        n.act = row.activation;
        n.channels = node_channels_[n.inputs[0]];
        out = add_node(std::move(n));
        break;
      }
    }
    if (row.channels != node_channels_[out]) {
      throw ConfigError("layer " + row.name + " declares " + std::to_string(row.channels) +
                        " channels but produces " + std::to_string(node_channels_[out]));
    }
    row_out[row.name] = out;
  }
  if (table_.empty()) return;
  if (row_out.at(table_.back().name) != output_node()) {
    throw ConfigError("last table row must be the network output");
  }
}

int Network::add_node(Node node) {
  node_channels_.push_back(node.channels);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

int Network::add_param(const std::string& name, Shape shape) {
  params_.push_back({name, Tensor(shape)});
  return static_cast<int>(params_.size()) - 1;
}

int Network::expand_conv(const std::string& name, int input, int in_ch, int k, int s, int c,
                         bool norm, Activation act) {
  if (k <= 0 || s <= 0 || c <= 0) throw ConfigError("layer " + name + ": non-positive k/s/c");
  Node conv;
  conv.op = Node::Op::conv;
  conv.name = (norm || act != Activation::linear) ? name + "/conv" : name;
  conv.inputs = {input};
  conv.kernel = k;
  conv.stride = s;
  conv.channels = c;
  conv.weight = add_param(name + "/weight", Shape{c, in_ch, k, k});
  // A bias ahead of instance normalization cancels exactly, so conv-norm has none.
  if (!norm) conv.bias = add_param(name + "/bias", Shape{1, 1, 1, c});
  int last = add_node(std::move(conv));
  if (norm) {
    Node n;
    n.op = Node::Op::norm;
    n.name = act != Activation::linear ? name + "/norm" : name;
    n.inputs = {last};
    n.channels = c;
    n.scale = add_param(name + "/scale", Shape{1, 1, 1, c});
    n.shift = add_param(name + "/shift", Shape{1, 1, 1, c});
    last = add_node(std::move(n));
  }
  if (act != Activation::linear) {
    Node a;
    a.op = Node::Op::act;
    a.name = name;
    a.inputs = {last};
    a.act = act;
    a.channels = c;
    last = add_node(std::move(a));
  }
  return last;
}

int Network::node_index(const std::string& name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == name) return static_cast<int>(i);
  }
  throw ConfigError("no node named " + name);
}

int Network::param_index(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<int>(i);
  }
  throw ConfigError("no parameter named " + name);
}

void Network::initialize(const InitOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  int head_weight = -1;
  // The output row's convolution (possibly behind a trailing activation node).
  for (int i = output_node(); i > 0; --i) {
    if (nodes_[i].op == Node::Op::conv) {
      head_weight = nodes_[i].weight;
      break;
    }
    if (nodes_[i].op != Node::Op::act) break;
  }
  for (std::size_t p = 0; p < params_.size(); ++p) {
    auto& t = params_[p].value;
    const std::string& name = params_[p].name;
    const bool is_scale = name.size() >= 6 && name.compare(name.size() - 6, 6, "/scale") == 0;
    const bool is_weight = name.size() >= 7 && name.compare(name.size() - 7, 7, "/weight") == 0;
    if (is_scale) {
      t.fill(1);
    } else if (is_weight) {
      if (opts.zero_head && static_cast<int>(p) == head_weight) {
        t.fill(0);
        continue;
      }
      const double fan_in = static_cast<double>(t.c()) * t.h() * t.w();
      std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan_in),
                                                  std::sqrt(6.0 / fan_in));
      for (auto& v : t.values()) v = static_cast<Real>(dist(rng));
    } else {
      t.fill(0);
    }
  }
}

std::size_t Network::param_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

std::size_t param_count(const Network& net) { return net.param_count(); }

namespace {

LayerSpec row(std::string name, LayerKind kind, int k, int s, int c, Activation act,
              std::vector<std::string> inputs) {
  return {std::move(name), kind, k, s, c, act, std::move(inputs)};
}

}  // namespace

std::vector<LayerSpec> generator_table(const NetScale& scale, int out_channels) {
  const auto C = [&](int c) { return scale.channels(c); };
  const auto R = Activation::relu;
  const auto E = Activation::elu;
  const auto L = Activation::linear;
  using K = LayerKind;
  std::vector<LayerSpec> t;
  t.push_back(row("con1", K::conv_norm, 7, 2, C(64), R, {"I"}));
  t.push_back(row("max1", K::maxpool, 3, 2, C(64), L, {"con1"}));
  const int res_c[] = {64, 64, 128, 128, 256, 256, 512, 512};
  const int res_s[] = {1, 1, 2, 1, 2, 1, 2, 1};
  std::string prev = "max1";
  for (int i = 0; i < 8; ++i) {
    std::string name = "res" + std::to_string(i + 1);
    t.push_back(row(name, K::res_block, 3, res_s[i], C(res_c[i]), R, {prev}));
    prev = name;
  }
  // Decoder: (upsample, conv, concat-with-skip, conv) x 4, then a final stage.
  struct Stage {
    int up_c, conv_c;
    const char* skip;
  };
  const Stage stages[] = {{512, 512, "res6"}, {512, 256, "res4"}, {256, 128, "res2"},
                          {128, 64, "con1"}};
  const int skip_c[] = {256, 128, 64, 64};
  int conv_id = 2;
  for (int i = 0; i < 4; ++i) {
    const std::string up = "ups" + std::to_string(i + 1);
    const std::string ca = "con" + std::to_string(conv_id);
    const std::string cb = "con" + std::to_string(conv_id + 1);
    const std::string cc = "cct" + std::to_string(i + 1);
    t.push_back(row(up, K::upsample, 0, 2, C(stages[i].up_c), L, {prev}));
    t.push_back(row(ca, K::conv_norm, 3, 1, C(stages[i].conv_c), E, {up}));
    t.push_back(row(cc, K::concat, 0, 1, C(stages[i].conv_c) + C(skip_c[i]), L,
                    {ca, stages[i].skip}));
    t.push_back(row(cb, K::conv_norm, 3, 1, C(stages[i].conv_c), E, {cc}));
    prev = cb;
    conv_id += 2;
  }
  t.push_back(row("ups5", K::upsample, 0, 2, C(64), L, {prev}));
  t.push_back(row("con10", K::conv_norm, 3, 1, C(32), E, {"ups5"}));
  t.push_back(row("con11", K::conv_norm, 3, 1, C(32), E, {"con10"}));
  t.push_back(row("O", K::conv, 3, 1, out_channels, Activation::tanh, {"con11"}));
  return t;
}

std::vector<LayerSpec> residual_block_table(int kernel, int stride, int channels) {
  using K = LayerKind;
  return {{"con1", K::conv_norm, kernel, stride, channels, Activation::relu, {"I"}},
          {"con2", K::conv_norm, kernel, 1, channels, Activation::linear, {"con1"}},
          {"skip", K::conv_norm, 1, stride, channels, Activation::linear, {"I"}},
          {"add", K::add, 0, 1, channels, Activation::linear, {"con2", "skip"}},
          {"O", K::activation, 0, 1, channels, Activation::relu, {"add"}}};
}

std::vector<LayerSpec> critic_table(const NetScale& scale) {
  std::vector<LayerSpec> t;
  const int chans[] = {16, 16, 32, 32, 64, 64, 128, 128, 256, 256, 512, 512};
  const int strides[] = {1, 1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1};
  std::string prev = "I";
  for (int i = 0; i < 12; ++i) {
    std::string name = "con" + std::to_string(i + 1);
    t.push_back(row(name, LayerKind::conv, 4, strides[i], scale.channels(chans[i]),
                    Activation::leaky_relu, {prev}));
    prev = name;
  }
  t.push_back(row("O", LayerKind::conv, 4, 1, 1, Activation::linear, {prev}));
  return t;
}

Network build_generator(const NetScale& scale, int out_channels, const InitOptions& init) {
  scale.validate();
  if (out_channels != 1 && out_channels != 3) throw ConfigError("generator output must be 1 or 3");
  const Role role = out_channels == 1 ? Role::generator_Y : Role::generator_X;
  Network net(role, scale, out_channels == 1 ? 3 : 1, generator_table(scale, out_channels));
  net.initialize(init);
  return net;
}

Network build_critic(const NetScale& scale, int in_channels, const InitOptions& init) {
  scale.validate();
  if (in_channels != 1 && in_channels != 3) throw ConfigError("critic input must be 1 or 3");
  const Role role = in_channels == 1 ? Role::critic_Y : Role::critic_X;
  Network net(role, scale, in_channels, critic_table(scale));
  net.initialize(init);
  return net;
}

Network build_residual_block(int in_channels, int kernel, int stride, int channels,
                             const InitOptions& init) {
  Network net(Role::other, NetScale{1.0, 32}, in_channels,
              {row("res", LayerKind::res_block, kernel, stride, channels, Activation::relu,
                   {"I"})});
  net.initialize(init);
  return net;
}

Gradients zero_gradients(const Network& net) {
  Gradients g;
  g.reserve(net.params().size());
  for (const auto& p : net.params()) g.emplace_back(p.value.shape());
  return g;
}

namespace {

std::span<const Real> param_span(const Network& net, int idx) {
  if (idx < 0) return {};
  return net.params()[idx].value.values();
}

std::span<Real> grad_span(Gradients* grads, int idx) {
  if (!grads || idx < 0) return {};
  return (*grads)[idx].values();
}

void accumulate(Tensor& dst, Tensor&& src) {
  if (dst.empty()) {
    dst = std::move(src);
  } else {
    dst += src;
  }
}

}  // namespace

Trace forward_trace(const Network& net, const Tensor& x, int stop_node) {
  const auto& nodes = net.nodes();
  if (x.c() != net.in_channels()) {
    throw ShapeError("network expects " + std::to_string(net.in_channels()) +
                     " input channels, got " + to_string(x.shape()));
  }
  const int stop = stop_node < 0 ? net.output_node() : stop_node;
  Trace tr;
  tr.values.resize(stop + 1);
  tr.norm.resize(stop + 1);
  tr.argmax.resize(stop + 1);
  tr.values[0] = x;
  for (int i = 1; i <= stop; ++i) {
    const Node& n = nodes[i];
    const Tensor& in = tr.values[n.inputs[0]];
    switch (n.op) {
      case Node::Op::input:
        break;
      case Node::Op::conv:
        tr.values[i] = ops::conv2d(in, net.params()[n.weight].value, param_span(net, n.bias),
                                   n.stride);
        break;
      case Node::Op::norm:
        tr.values[i] = ops::instance_norm(in, param_span(net, n.scale), param_span(net, n.shift),
                                          &tr.norm[i]);
        break;
      case Node::Op::act:
        tr.values[i] = ops::activate(in, n.act);
        break;
      case Node::Op::maxpool:
        tr.values[i] = ops::max_pool(in, n.kernel, n.stride, &tr.argmax[i]);
        break;
      case Node::Op::upsample:
        tr.values[i] = ops::upsample_nearest(in, n.stride);
        break;
      case Node::Op::concat:
        tr.values[i] = ops::concat_channels(in, tr.values[n.inputs[1]]);
        break;
      case Node::Op::add:
        tr.values[i] = in + tr.values[n.inputs[1]];
        break;
    }
  }
  tr.last = stop;
  return tr;
}

Tensor forward(const Network& net, const Tensor& x) { return forward_trace(net, x).output(); }

Tensor backward(const Network& net, const Trace& trace, const Tensor& grad_out, Gradients* grads,
                std::vector<Tensor>* node_grads) {
  const auto& nodes = net.nodes();
  require_same_shape(trace.output(), grad_out, "backward");
  std::vector<Tensor> g(trace.last + 1);
  g[trace.last] = grad_out;
  for (int i = trace.last; i >= 1; --i) {
    if (g[i].empty()) continue;
    const Node& n = nodes[i];
    const Tensor& in = trace.values[n.inputs[0]];
    switch (n.op) {
      case Node::Op::input:
        break;
      case Node::Op::conv: {
        const Tensor& w = net.params()[n.weight].value;
        if (grads) {
          ops::conv2d_backward_params(in, g[i], n.stride, (*grads)[n.weight],
                                      grad_span(grads, n.bias));
        }
        accumulate(g[n.inputs[0]], ops::conv2d_backward_data(g[i], w, in.shape(), n.stride));
        break;
      }
      case Node::Op::norm:
        accumulate(g[n.inputs[0]],
                   ops::instance_norm_backward(in, trace.norm[i], param_span(net, n.scale), g[i],
                                               grad_span(grads, n.scale),
                                               grad_span(grads, n.shift)));
        break;
      case Node::Op::act:
        accumulate(g[n.inputs[0]], ops::activate_backward(in, trace.values[i], g[i], n.act));
        break;
      case Node::Op::maxpool:
        accumulate(g[n.inputs[0]], ops::max_pool_backward(in.shape(), trace.argmax[i], g[i]));
        break;
      case Node::Op::upsample:
        accumulate(g[n.inputs[0]], ops::upsample_nearest_backward(g[i], n.stride));
        break;
      case Node::Op::concat: {
        Tensor ga, gb;
        ops::split_channels(g[i], in.c(), ga, gb);
        accumulate(g[n.inputs[0]], std::move(ga));
        accumulate(g[n.inputs[1]], std::move(gb));
        break;
      }
      case Node::Op::add:
        accumulate(g[n.inputs[0]], Tensor(g[i]));
        accumulate(g[n.inputs[1]], Tensor(g[i]));
        break;
    }
  }
  Tensor dx = g[0].empty() ? Tensor(trace.values[0].shape()) : g[0];
  if (node_grads) *node_grads = std::move(g);
  return dx;
}

int feature_node(const Network& critic) {
  // The output row expands to a single node; the row before it is con12.
  const int out = critic.output_node();
  return critic.nodes()[out].inputs.at(0);
}

Tensor critic_features(const Network& critic, const Tensor& x) {
  return forward_trace(critic, x, feature_node(critic)).output();
}

std::vector<double> critic_scores(const Tensor& patch_map) {
  std::vector<double> s(patch_map.n());
  for (int i = 0; i < patch_map.n(); ++i) {
    double acc = 0;
    for (Real v : patch_map.sample(i)) acc += v;
    s[i] = acc / static_cast<double>(patch_map.shape().sample());
  }
  return s;
}

Tensor score_gradient(const Shape& patch_shape, std::span<const double> weights) {
  Tensor g(patch_shape);
  const double cells = static_cast<double>(patch_shape.sample());
  for (int i = 0; i < patch_shape.n; ++i) {
    const Real v = static_cast<Real>(weights[i] / cells);
    for (auto& x : g.sample(i)) x = v;
  }
  return g;
}

void accumulate_input_gradient_vjp(const Network& net, const Trace& trace,
                                   const std::vector<Tensor>& node_grads, const Tensor& tangent,
                                   Gradients& grads) {
  const auto& nodes = net.nodes();
  std::vector<Tensor> r(trace.last + 1);
  r[0] = tangent;
  for (int i = 1; i <= trace.last; ++i) {
    const Node& n = nodes[i];
    const Tensor& rin = r[n.inputs[0]];
    switch (n.op) {
      case Node::Op::conv:
        if (!node_grads[i].empty()) {
          ops::conv2d_backward_params(rin, node_grads[i], n.stride, grads[n.weight], {});
        }
        if (i < trace.last) r[i] = ops::conv2d(rin, net.params()[n.weight].value, {}, n.stride);
        break;
      case Node::Op::act:
        if (!ops::is_piecewise_linear(n.act)) {
          throw ConfigError("input-gradient VJP needs piecewise-linear activations, got " +
                            ops::to_string(n.act) + " at " + n.name);
        }
        r[i] = ops::activate_backward(trace.values[n.inputs[0]], trace.values[i], rin, n.act);
        break;
      default:
        throw ConfigError("input-gradient VJP supports conv/activation chains only; node " +
                          n.name);
    }
  }
}

}  // namespace percdepth::nn
