#include "mcdrop/network.hpp"

#include <cmath>
#include <cstring>

namespace mcdrop {

const char *to_string(Nonlinearity n) noexcept {
  switch (n) {
  case Nonlinearity::relu: return "relu";
  case Nonlinearity::tanh: return "tanh";
  case Nonlinearity::identity: return "identity";
  }
  return "?";
}

Nonlinearity parse_nonlinearity(const std::string &name) {
  if (name == "relu") return Nonlinearity::relu;
  if (name == "tanh") return Nonlinearity::tanh;
  if (name == "identity") return Nonlinearity::identity;
  throw std::invalid_argument("unknown nonlinearity '" + name + "'");
}

namespace {

void validate_specs(const std::vector<LayerSpec> &layers, OutputHeads heads) {
  if (layers.empty()) throw ShapeError("network needs at least one weight layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec &l = layers[i];
    if (l.in_width == 0 || l.out_width == 0) {
      throw ShapeError("layer " + std::to_string(i) + ": widths must be positive");
    }
    if (!(l.retain_prob > 0.0 && l.retain_prob <= 1.0)) {
      throw std::invalid_argument("layer " + std::to_string(i) + ": retain_prob " +
                                  std::to_string(l.retain_prob) + " outside (0, 1]");
    }
    if (i + 1 < layers.size() && l.out_width != layers[i + 1].in_width) {
      throw ShapeError("layer " + std::to_string(i) + " out_width " + std::to_string(l.out_width) +
                       " does not chain into layer " + std::to_string(i + 1) + " in_width " +
                       std::to_string(layers[i + 1].in_width));
    }
  }
  if (heads == OutputHeads::mean_and_logvar && layers.back().out_width % 2 != 0) {
    throw ShapeError("mean_and_logvar heads need an even final width");
  }
}

Tensor2 apply(Nonlinearity n, Tensor2 x) {
  switch (n) {
  case Nonlinearity::relu: return elementwise(Elementwise::relu, x);
  case Nonlinearity::tanh: return elementwise(Elementwise::tanh, x);
  case Nonlinearity::identity: return x;
  }
  return x;
}

void check_input(const Network &net, const Tensor2 &x) {
  if (x.cols() != net.input_width()) {
    throw ShapeError("network input: expected " + std::to_string(net.input_width()) +
                     " columns, got " + x.shape_string());
  }
}

Tensor2 scaled_mask(const Tensor2 &mask, double retain_prob) {
  return retain_prob == 1.0 ? mask : scale(mask, 1.0 / retain_prob);
}

void check_masks(const Network &net, const MaskSet &masks) {
  if (masks.sites() != net.num_layers()) {
    throw ShapeError("mask set has " + std::to_string(masks.sites()) + " sites, network has " +
                     std::to_string(net.num_layers()) + " weight layers");
  }
  for (std::size_t i = 0; i < masks.sites(); ++i) {
    if (masks.masks[i].rows() != 1 || masks.masks[i].cols() != net.layer(i).in_width) {
      throw ShapeError("mask " + std::to_string(i) + " has shape " +
                       masks.masks[i].shape_string());
    }
  }
}

} // namespace

Network::Network(std::vector<LayerSpec> layers, std::vector<Tensor2> weights,
                 std::vector<Tensor2> biases, OutputHeads heads)
    : layers_(std::move(layers)), weights_(std::move(weights)), biases_(std::move(biases)),
      heads_(heads) {
  validate_specs(layers_, heads_);
  if (weights_.size() != layers_.size() || biases_.size() != layers_.size()) {
    throw ShapeError("network: parameter count does not match layer count");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec &l = layers_[i];
    if (weights_[i].rows() != l.in_width || weights_[i].cols() != l.out_width) {
      throw ShapeError("layer " + std::to_string(i) + " weight shape " +
                       weights_[i].shape_string() + " does not match the layer spec");
    }
    if (biases_[i].rows() != 1 || biases_[i].cols() != l.out_width) {
      throw ShapeError("layer " + std::to_string(i) + " bias shape " + biases_[i].shape_string() +
                       " does not match the layer spec");
    }
  }
}

std::size_t Network::parameter_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) n += weights_[i].size() + biases_[i].size();
  return n;
}

std::uint64_t Network::fingerprint() const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const Tensor2 &t) {
    for (double v : t.data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof v);
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
      }
    }
  };
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    feed(weights_[i]);
    feed(biases_[i]);
  }
  return h;
}

std::vector<LayerSpec> make_mlp_specs(const MlpShape &s) {
  if (s.hidden_layers == 0) throw ShapeError("MLP needs at least one hidden layer");
  const std::size_t out =
      s.heads == OutputHeads::mean_and_logvar ? 2 * s.target_width : s.target_width;
  std::vector<LayerSpec> specs;
  specs.push_back({s.input_width, s.width, s.nonlinearity, s.input_dropout ? s.retain_prob : 1.0});
  for (std::size_t i = 1; i < s.hidden_layers; ++i) {
    specs.push_back({s.width, s.width, s.nonlinearity, s.retain_prob});
  }
  specs.push_back({s.width, out, Nonlinearity::identity, s.retain_prob});
  return specs;
}

Network init_network(std::vector<LayerSpec> specs, std::uint64_t init_seed, OutputHeads heads) {
  validate_specs(specs, heads);
  Rng rng(init_seed);
  std::vector<Tensor2> weights;
  std::vector<Tensor2> biases;
  for (const LayerSpec &l : specs) {
    const double s = std::sqrt(1.0 / static_cast<double>(l.in_width));
    Tensor2 w(l.in_width, l.out_width);
    for (double &v : w.mutable_data()) v = rng.uniform(-s, s);
    weights.push_back(std::move(w));
    biases.emplace_back(1, l.out_width);
  }
  return Network(std::move(specs), std::move(weights), std::move(biases), heads);
}

Network init_network(const MlpShape &shape, std::uint64_t init_seed) {
  return init_network(make_mlp_specs(shape), init_seed, shape.heads);
}

MaskSet sample_masks_from_seed(const Network &net, std::uint64_t seed) {
  MaskSet set;
  set.seed = seed;
  Rng rng(seed);
  for (const LayerSpec &l : net.layers()) {
    Tensor2 z(1, l.in_width, 1.0);
    if (l.retain_prob < 1.0) {
      for (double &v : z.mutable_data()) v = rng.bernoulli(l.retain_prob) ? 1.0 : 0.0;
    }
    set.masks.push_back(std::move(z));
  }
  return set;
}

MaskSet sample_masks(const Network &net, Rng &rng) {
  return sample_masks_from_seed(net, rng.next_u64());
}

MaskSet all_ones_masks(const Network &net) {
  MaskSet set;
  for (const LayerSpec &l : net.layers()) set.masks.emplace_back(1, l.in_width, 1.0);
  return set;
}

Tensor2 forward_masked(const Network &net, const Tensor2 &x, const MaskSet &masks) {
  check_input(net, x);
  check_masks(net, masks);
  Tensor2 h = x;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const LayerSpec &l = net.layer(i);
    h = mul_row(h, scaled_mask(masks.masks[i], l.retain_prob));
    h = apply(l.nonlinearity, add_row(matmul(h, net.weight(i)), net.bias(i)));
  }
  return h;
}

Tensor2 forward_raw(const Network &net, const Tensor2 &x) {
  check_input(net, x);
  Tensor2 h = x;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    h = apply(net.layer(i).nonlinearity, add_row(matmul(h, net.weight(i)), net.bias(i)));
  }
  return h;
}

Tensor2 forward_scaled(const Network &net, const Tensor2 &x) { return forward_raw(net, x); }

std::pair<Tensor2, Tensor2> split_heads(const Network &net, const Tensor2 &out) {
  if (net.heads() != OutputHeads::mean_and_logvar) {
    throw ContractError("split_heads: network has a single output head");
  }
  const std::size_t half = net.target_width();
  if (out.cols() != 2 * half) throw ShapeError("split_heads: output " + out.shape_string());
  Tensor2 mean(out.rows(), half);
  Tensor2 logvar(out.rows(), half);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < half; ++c) {
      mean.at(r, c) = out(r, c);
      logvar.at(r, c) = out(r, half + c);
    }
  }
  return {std::move(mean), std::move(logvar)};
}

std::vector<Var> TapeParams::all() const {
  std::vector<Var> v = weights;
  v.insert(v.end(), biases.begin(), biases.end());
  return v;
}

TapeParams record_params(GradTape &tape, const Network &net) {
  TapeParams p;
  for (std::size_t i = 0; i < net.num_layers(); ++i) p.weights.push_back(tape.leaf(net.weight(i)));
  for (std::size_t i = 0; i < net.num_layers(); ++i) p.biases.push_back(tape.leaf(net.bias(i)));
  return p;
}

Var record_forward_masked(GradTape &tape, const Network &net, const TapeParams &params, Var x,
                          const MaskSet &masks) {
  check_input(net, tape.value(x));
  check_masks(net, masks);
  Var h = x;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const LayerSpec &l = net.layer(i);
    h = tape.mul_row(h, tape.leaf(scaled_mask(masks.masks[i], l.retain_prob)));
    h = tape.add_row(tape.matmul(h, params.weights[i]), params.biases[i]);
    switch (l.nonlinearity) {
    case Nonlinearity::relu: h = tape.elementwise(Elementwise::relu, h); break;
    case Nonlinearity::tanh: h = tape.elementwise(Elementwise::tanh, h); break;
    case Nonlinearity::identity: break;
    }
  }
  return h;
}

} // namespace mcdrop
