#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mcdrop/data.hpp"
#include "mcdrop/network.hpp"

namespace mcdrop {

/// λ = l² p / (2 N τ). Throws std::domain_error on non-positive input.
double lambda_from_tau(double length_scale, double retain_prob, double n_train, double tau);
/// τ = l² p / (2 N λ). Throws std::domain_error on non-positive input.
double tau_from_lambda(double length_scale, double retain_prob, double n_train, double lambda);

/// Coupled dropout hyperparameters. τ·2·N·λ = l²·p holds for every instance:
/// construction goes through one of the factories, which derive the dependent
/// field.
class HyperParams {
public:
  static HyperParams from_tau(double retain_prob, double tau, double length_scale,
                              std::size_t n_train);
  static HyperParams from_lambda(double retain_prob, double weight_decay, double length_scale,
                                 std::size_t n_train);

  double retain_prob() const noexcept { return p_; }
  double tau() const noexcept { return tau_; }
  double length_scale() const noexcept { return l_; }
  double weight_decay() const noexcept { return lambda_; }
  std::size_t n_train() const noexcept { return n_; }

private:
  HyperParams(double p, double tau, double l, double lambda, std::size_t n)
      : p_(p), tau_(tau), l_(l), lambda_(lambda), n_(n) {}
  double p_;
  double tau_;
  double l_;
  double lambda_;
  std::size_t n_;
};

enum class Objective { mse_homoscedastic, nll_heteroscedastic };

struct TrainConfig {
  std::size_t epochs = 4000;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  Objective objective = Objective::mse_homoscedastic;
  std::uint64_t seed = 0;
};

/// Mini-batch objective: mean per-example error plus λ Σ (‖W_i‖² + ‖b_i‖²).
///
/// mse_homoscedastic: error is (y - f)².
/// nll_heteroscedastic: error is 0.5 exp(-s) (y - f)² + 0.5 s, with s the
/// log-variance head.
double dropout_loss(const Network &net, const Tensor2 &batch_x, const Tensor2 &batch_y,
                    const MaskSet &masks, double weight_decay, Objective objective);

struct LossAndGradient {
  double loss;
  /// Per layer, same shapes as the network parameters.
  std::vector<Tensor2> weight_grads;
  std::vector<Tensor2> bias_grads;
};

LossAndGradient dropout_loss_gradient(const Network &net, const Tensor2 &batch_x,
                                      const Tensor2 &batch_y, const MaskSet &masks,
                                      double weight_decay, Objective objective);

/// Records the objective on `tape` and returns the scalar loss node.
Var record_dropout_loss(GradTape &tape, const Network &net, const TapeParams &params, Var x,
                        const Tensor2 &batch_y, const MaskSet &masks, double weight_decay,
                        Objective objective);

struct TrainResult {
  Network network;
  /// Mean mini-batch loss per epoch.
  std::vector<double> epoch_loss;
};

/// Called after each completed epoch (1-based count).
using EpochCallback = std::function<void(std::size_t epoch, const Network &)>;

/// Plain SGD with a fresh mask set per mini-batch. `data` must already be
/// normalized. Deterministic for a fixed config.seed. Throws TrainingDiverged
/// when the loss stops being finite.
TrainResult train(Network network, const Dataset &data, const HyperParams &hyper,
                  const TrainConfig &config, const EpochCallback &on_epoch = {});

} // namespace mcdrop
