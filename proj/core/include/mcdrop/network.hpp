#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mcdrop/random.hpp"
#include "mcdrop/tape.hpp"
#include "mcdrop/tensor.hpp"

namespace mcdrop {

enum class Nonlinearity { relu, tanh, identity };

const char *to_string(Nonlinearity n) noexcept;
Nonlinearity parse_nonlinearity(const std::string &name);

/// One weight layer: y = act((x ∘ z / retain_prob) W + b), with z the mask
/// over the layer's inputs.
struct LayerSpec {
  std::size_t in_width;
  std::size_t out_width;
  Nonlinearity nonlinearity;
  /// Probability of keeping an input unit (1 - dropout rate).
  double retain_prob;

  friend bool operator==(const LayerSpec &, const LayerSpec &) = default;
};

enum class OutputHeads { single, mean_and_logvar };

/// Feed-forward stack of weight layers. Every weight layer has one mask site
/// on its input; a site with retain_prob 1 never drops anything.
class Network {
public:
  Network(std::vector<LayerSpec> layers, std::vector<Tensor2> weights, std::vector<Tensor2> biases,
          OutputHeads heads = OutputHeads::single);

  std::size_t num_layers() const noexcept { return layers_.size(); }
  const std::vector<LayerSpec> &layers() const noexcept { return layers_; }
  const LayerSpec &layer(std::size_t i) const { return layers_.at(i); }
  const Tensor2 &weight(std::size_t i) const { return weights_.at(i); }
  const Tensor2 &bias(std::size_t i) const { return biases_.at(i); }
  Tensor2 &mutable_weight(std::size_t i) { return weights_.at(i); }
  Tensor2 &mutable_bias(std::size_t i) { return biases_.at(i); }
  OutputHeads heads() const noexcept { return heads_; }

  std::size_t input_width() const noexcept { return layers_.front().in_width; }
  /// Width of the final affine layer (2× the target width for mean_and_logvar).
  std::size_t output_width() const noexcept { return layers_.back().out_width; }
  /// Width of the mean head.
  std::size_t target_width() const noexcept {
    return heads_ == OutputHeads::single ? output_width() : output_width() / 2;
  }
  std::size_t parameter_count() const noexcept;

  /// FNV-1a over the raw bytes of every weight and bias.
  std::uint64_t fingerprint() const noexcept;

  friend bool operator==(const Network &, const Network &) = default;

private:
  std::vector<LayerSpec> layers_;
  std::vector<Tensor2> weights_;
  std::vector<Tensor2> biases_;
  OutputHeads heads_;
};

/// Shape of a standard MLP used by the experiments.
struct MlpShape {
  std::size_t input_width = 1;
  std::size_t hidden_layers = 1;
  std::size_t width = 50;
  std::size_t target_width = 1;
  Nonlinearity nonlinearity = Nonlinearity::relu;
  double retain_prob = 0.9;
  /// Also drop raw input features (mask on the first weight layer's input).
  bool input_dropout = false;
  OutputHeads heads = OutputHeads::single;
};

std::vector<LayerSpec> make_mlp_specs(const MlpShape &shape);

/// Weights uniform in [-s, s] with s = sqrt(1 / in_width); biases zero.
Network init_network(std::vector<LayerSpec> specs, std::uint64_t init_seed,
                     OutputHeads heads = OutputHeads::single);
Network init_network(const MlpShape &shape, std::uint64_t init_seed);

/// One Bernoulli mask per weight layer, each 1×in_width with entries in {0,1}.
struct MaskSet {
  std::vector<Tensor2> masks;
  std::uint64_t seed = 0;

  std::size_t sites() const noexcept { return masks.size(); }
};

/// Draws a seed from `rng` and fills each site with Bernoulli(retain_prob)
/// entries from a stream with that seed. Sites with retain_prob 1 are all
/// ones and consume no randomness.
MaskSet sample_masks(const Network &net, Rng &rng);
MaskSet sample_masks_from_seed(const Network &net, std::uint64_t seed);
MaskSet all_ones_masks(const Network &net);

/// Stochastic pass: every layer sees its input multiplied by mask / retain_prob.
Tensor2 forward_masked(const Network &net, const Tensor2 &x, const MaskSet &masks);
/// Standard-dropout pass. Masks were scaled by 1/p during training, so the
/// expectation-equivalent network is the unmodified one.
Tensor2 forward_scaled(const Network &net, const Tensor2 &x);
/// Plain MLP pass with no masking or scaling.
Tensor2 forward_raw(const Network &net, const Tensor2 &x);

/// Splits mean_and_logvar output into (mean, log-variance) halves.
std::pair<Tensor2, Tensor2> split_heads(const Network &net, const Tensor2 &out);

/// Network parameters recorded as tape leaves, in layer order.
struct TapeParams {
  std::vector<Var> weights;
  std::vector<Var> biases;

  /// weights then biases, matching Network layer order.
  std::vector<Var> all() const;
};

TapeParams record_params(GradTape &tape, const Network &net);
Var record_forward_masked(GradTape &tape, const Network &net, const TapeParams &params, Var x,
                          const MaskSet &masks);

} // namespace mcdrop
