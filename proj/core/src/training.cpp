#include "mcdrop/training.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace mcdrop {

namespace {

void require_positive(double v, const char *name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::domain_error(std::string(name) + " must be positive, got " + std::to_string(v));
  }
}

Tensor2 head_selector(std::size_t width, std::size_t offset, std::size_t count) {
  Tensor2 s(width, count);
  for (std::size_t c = 0; c < count; ++c) s.at(offset + c, c) = 1.0;
  return s;
}

} // namespace

double lambda_from_tau(double length_scale, double retain_prob, double n_train, double tau) {
  require_positive(length_scale, "length scale");
  require_positive(retain_prob, "retain probability");
  require_positive(n_train, "N");
  require_positive(tau, "tau");
  return length_scale * length_scale * retain_prob / (2.0 * n_train * tau);
}

double tau_from_lambda(double length_scale, double retain_prob, double n_train, double lambda) {
  require_positive(length_scale, "length scale");
  require_positive(retain_prob, "retain probability");
  require_positive(n_train, "N");
  require_positive(lambda, "lambda");
  return length_scale * length_scale * retain_prob / (2.0 * n_train * lambda);
}

HyperParams HyperParams::from_tau(double retain_prob, double tau, double length_scale,
                                  std::size_t n_train) {
  if (retain_prob > 1.0) throw std::domain_error("retain probability must be <= 1");
  const double lambda =
      lambda_from_tau(length_scale, retain_prob, static_cast<double>(n_train), tau);
  return HyperParams(retain_prob, tau, length_scale, lambda, n_train);
}

HyperParams HyperParams::from_lambda(double retain_prob, double weight_decay, double length_scale,
                                     std::size_t n_train) {
  if (retain_prob > 1.0) throw std::domain_error("retain probability must be <= 1");
  const double tau =
      tau_from_lambda(length_scale, retain_prob, static_cast<double>(n_train), weight_decay);
  return HyperParams(retain_prob, tau, length_scale, weight_decay, n_train);
}

Var record_dropout_loss(GradTape &tape, const Network &net, const TapeParams &params, Var x,
                        const Tensor2 &batch_y, const MaskSet &masks, double weight_decay,
                        Objective objective) {
  const Tensor2 &xv = tape.value(x);
  if (batch_y.rows() != xv.rows() || batch_y.cols() != net.target_width()) {
    throw ShapeError("dropout_loss: targets " + batch_y.shape_string() + " vs inputs " +
                     xv.shape_string() + " and target width " +
                     std::to_string(net.target_width()));
  }
  if (objective == Objective::nll_heteroscedastic && net.heads() != OutputHeads::mean_and_logvar) {
    throw ContractError("heteroscedastic objective needs a mean_and_logvar network");
  }
  if (weight_decay < 0.0) throw std::domain_error("weight decay must be non-negative");

  const double inv_batch = 1.0 / static_cast<double>(xv.rows());
  Var out = record_forward_masked(tape, net, params, x, masks);
  Var y = tape.leaf(batch_y);

  Var data_term = [&] {
    if (objective == Objective::mse_homoscedastic) {
      Var mean = out;
      if (net.heads() == OutputHeads::mean_and_logvar) {
        mean = tape.matmul(out, tape.leaf(head_selector(net.output_width(), 0, net.target_width())));
      }
      return tape.scale(tape.sum(tape.elementwise(Elementwise::square, tape.sub(mean, y))),
                        inv_batch);
    }
    const std::size_t half = net.target_width();
    Var mean = tape.matmul(out, tape.leaf(head_selector(2 * half, 0, half)));
    Var logvar = tape.matmul(out, tape.leaf(head_selector(2 * half, half, half)));
    Var sq = tape.elementwise(Elementwise::square, tape.sub(y, mean));
    Var precision = tape.elementwise(Elementwise::exp, tape.scale(logvar, -1.0));
    Var per_point = tape.add(tape.hadamard(precision, sq), logvar);
    return tape.scale(tape.sum(per_point), 0.5 * inv_batch);
  }();

  if (weight_decay == 0.0) return data_term;
  Var reg = tape.sum(tape.elementwise(Elementwise::square, params.weights[0]));
  reg = tape.add(reg, tape.sum(tape.elementwise(Elementwise::square, params.biases[0])));
  for (std::size_t i = 1; i < net.num_layers(); ++i) {
    reg = tape.add(reg, tape.sum(tape.elementwise(Elementwise::square, params.weights[i])));
    reg = tape.add(reg, tape.sum(tape.elementwise(Elementwise::square, params.biases[i])));
  }
  return tape.add(data_term, tape.scale(reg, weight_decay));
}

double dropout_loss(const Network &net, const Tensor2 &batch_x, const Tensor2 &batch_y,
                    const MaskSet &masks, double weight_decay, Objective objective) {
  GradTape tape;
  TapeParams params = record_params(tape, net);
  Var loss = record_dropout_loss(tape, net, params, tape.leaf(batch_x), batch_y, masks,
                                 weight_decay, objective);
  return tape.scalar(loss);
}

LossAndGradient dropout_loss_gradient(const Network &net, const Tensor2 &batch_x,
                                      const Tensor2 &batch_y, const MaskSet &masks,
                                      double weight_decay, Objective objective) {
  GradTape tape;
  TapeParams params = record_params(tape, net);
  Var loss = record_dropout_loss(tape, net, params, tape.leaf(batch_x), batch_y, masks,
                                 weight_decay, objective);
  auto grads = tape.grad(loss, params.all());
  LossAndGradient out{tape.scalar(loss), {}, {}};
  const std::size_t L = net.num_layers();
  for (std::size_t i = 0; i < L; ++i) out.weight_grads.push_back(std::move(grads[i]));
  for (std::size_t i = 0; i < L; ++i) out.bias_grads.push_back(std::move(grads[L + i]));
  return out;
}

TrainResult train(Network network, const Dataset &data, const HyperParams &hyper,
                  const TrainConfig &config, const EpochCallback &on_epoch) {
  const std::size_t n = data.size();
  if (hyper.n_train() != n) {
    throw ContractError("train: hyperparameters were derived for N=" +
                        std::to_string(hyper.n_train()) + " but the dataset has " +
                        std::to_string(n) + " rows");
  }
  if (config.batch_size == 0 || config.batch_size > n) {
    throw ContractError("train: batch_size must lie in [1, N]");
  }
  if (!(config.learning_rate > 0.0)) throw ContractError("train: learning rate must be positive");
  if (config.objective == Objective::nll_heteroscedastic &&
      network.heads() != OutputHeads::mean_and_logvar) {
    throw ContractError("heteroscedastic objective needs a mean_and_logvar network");
  }

  TrainResult result{std::move(network), {}};
  result.epoch_loss.reserve(config.epochs);
  Network &net = result.network;
  Rng rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t d = data.features();
  GradTape tape;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t k = n - 1; k > 0; --k) {
      const auto j = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(k + 1));
      std::swap(order[k], order[std::min(j, k)]);
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, n - start);
      Tensor2 bx(b, d);
      Tensor2 by(b, 1);
      for (std::size_t r = 0; r < b; ++r) {
        const std::size_t row = order[start + r];
        for (std::size_t c = 0; c < d; ++c) bx.at(r, c) = data.x(row, c);
        by.at(r, 0) = data.y(row, 0);
      }
      MaskSet masks = sample_masks(net, rng);
      double loss = 0.0;
      try {
        tape.clear();
        TapeParams params = record_params(tape, net);
        Var lv = record_dropout_loss(tape, net, params, tape.leaf(std::move(bx)), by, masks,
                                     hyper.weight_decay(), config.objective);
        loss = tape.scalar(lv);
        if (!std::isfinite(loss)) throw std::domain_error("loss is not finite");
        auto grads = tape.grad(lv, params.all());
        const std::size_t L = net.num_layers();
        for (std::size_t i = 0; i < L; ++i) {
          auto w = net.mutable_weight(i).mutable_data();
          auto gw = grads[i].data();
          for (std::size_t k = 0; k < w.size(); ++k) w[k] -= config.learning_rate * gw[k];
          auto bb = net.mutable_bias(i).mutable_data();
          auto gb = grads[L + i].data();
          for (std::size_t k = 0; k < bb.size(); ++k) bb[k] -= config.learning_rate * gb[k];
        }
        for (std::size_t i = 0; i < L; ++i) {
          require_finite(net.weight(i), "weights");
          require_finite(net.bias(i), "biases");
        }
      } catch (const std::domain_error &e) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch + 1) + ": " +
                                   e.what(),
                               epoch + 1);
      }
      loss_sum += loss;
      ++batches;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    if (on_epoch) on_epoch(epoch + 1, net);
  }
  return result;
}

} // namespace mcdrop
