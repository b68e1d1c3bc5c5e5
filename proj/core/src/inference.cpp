#include "mcdrop/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>

namespace mcdrop {

namespace {

void require_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw std::domain_error("tau must be positive, got " + std::to_string(tau));
  }
}

void require_passes(std::size_t T) {
  if (T < 2) throw ContractError("MC prediction needs T >= 2 passes, got " + std::to_string(T));
}

/// Runs T masked passes; returns the raw network outputs per pass.
std::vector<Tensor2> run_passes(const Network &net, const Tensor2 &x, std::size_t T, Rng &rng) {
  const std::uint64_t base = rng.next_u64();
  std::vector<Tensor2> outs;
  outs.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    outs.push_back(forward_masked(net, x, sample_masks_from_seed(net, derive_seed(base, {t}))));
  }
  return outs;
}

void require_single_target(const Network &net) {
  if (net.target_width() != 1) {
    throw ContractError("predictive distributions are computed for single-target networks");
  }
}

} // namespace

PredictiveDistribution summarize_samples(Tensor2 samples, double tau) {
  require_tau(tau);
  const std::size_t T = samples.rows();
  const std::size_t Q = samples.cols();
  const double inv_t = 1.0 / static_cast<double>(T);
  PredictiveDistribution d{std::move(samples), {}, {}, {}, {}, tau, std::nullopt};
  d.mean.resize(Q);
  d.epistemic_var.resize(Q);
  d.noise_var.assign(Q, 1.0 / tau);
  d.total_var.resize(Q);
  for (std::size_t q = 0; q < Q; ++q) {
    const double ref = d.samples(0, q);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double dev = d.samples(t, q) - ref;
      s1 += dev;
      s2 += dev * dev;
    }
    const double shift = s1 * inv_t;
    d.mean[q] = ref + shift;
    d.epistemic_var[q] = std::max(0.0, s2 * inv_t - shift * shift);
    d.total_var[q] = d.epistemic_var[q] + d.noise_var[q];
  }
  return d;
}

PredictiveDistribution mc_predict(const Network &net, const Tensor2 &queries, std::size_t T,
                                  double tau, Rng &rng, const NormStats &norm) {
  require_passes(T);
  require_tau(tau);
  require_single_target(net);
  const Tensor2 x = norm.transform_x(queries);
  auto outs = run_passes(net, x, T, rng);
  Tensor2 samples(T, queries.rows());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t q = 0; q < queries.rows(); ++q) samples.at(t, q) = norm.inverse_y(outs[t](q, 0));
  }
  return summarize_samples(std::move(samples), tau);
}

PredictiveDistribution mc_predict_hetero(const Network &net, const Tensor2 &queries,
                                         std::size_t T, Rng &rng, const NormStats &norm) {
  require_passes(T);
  if (net.heads() != OutputHeads::mean_and_logvar) {
    throw ContractError("mc_predict_hetero needs a mean_and_logvar network");
  }
  require_single_target(net);
  const Tensor2 x = norm.transform_x(queries);
  auto outs = run_passes(net, x, T, rng);
  const std::size_t Q = queries.rows();
  const double var_scale = norm.y_std * norm.y_std;
  Tensor2 samples(T, Q);
  Tensor2 noise(T, Q);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t q = 0; q < Q; ++q) {
      samples.at(t, q) = norm.inverse_y(outs[t](q, 0));
      noise.at(t, q) = std::exp(outs[t](q, 1)) * var_scale;
    }
  }
  require_finite(noise, "heteroscedastic noise variance");
  PredictiveDistribution d = summarize_samples(std::move(samples), 1.0);
  d.tau.reset();
  const double inv_t = 1.0 / static_cast<double>(T);
  for (std::size_t q = 0; q < Q; ++q) {
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) s += noise(t, q);
    d.noise_var[q] = s * inv_t;
    d.total_var[q] = d.epistemic_var[q] + d.noise_var[q];
  }
  d.sample_noise_var = std::move(noise);
  return d;
}

std::vector<double> predict_standard(const Network &net, const Tensor2 &queries,
                                     const NormStats &norm) {
  require_single_target(net);
  const Tensor2 out = forward_scaled(net, norm.transform_x(queries));
  std::vector<double> pred(queries.rows());
  for (std::size_t q = 0; q < pred.size(); ++q) pred[q] = norm.inverse_y(out(q, 0));
  return pred;
}

double rmse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.empty()) throw ContractError("rmse: empty input");
  if (predictions.size() != targets.size()) {
    throw ShapeError("rmse: " + std::to_string(predictions.size()) + " predictions vs " +
                     std::to_string(targets.size()) + " targets");
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double e = predictions[i] - targets[i];
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(targets.size()));
}

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178; // 0.5 * log(2π)

template <typename NoiseVar>
double log_likelihood_impl(const Tensor2 &samples, std::span<const double> targets,
                           NoiseVar noise_var) {
  const std::size_t T = samples.rows();
  const std::size_t Q = samples.cols();
  if (targets.size() != Q) {
    throw ShapeError("mc_log_likelihood: samples " + samples.shape_string() + " vs " +
                     std::to_string(targets.size()) + " targets");
  }
  const double log_t = std::log(static_cast<double>(T));
  std::vector<double> terms(T);
  double total = 0.0;
  for (std::size_t q = 0; q < Q; ++q) {
    double hi = -INFINITY;
    for (std::size_t t = 0; t < T; ++t) {
      const double v = noise_var(t, q);
      const double e = targets[q] - samples(t, q);
      terms[t] = -0.5 * e * e / v - 0.5 * std::log(v);
      hi = std::max(hi, terms[t]);
    }
    double acc = 0.0;
    for (std::size_t t = 0; t < T; ++t) acc += std::exp(terms[t] - hi);
    total += hi + std::log(acc) - log_t - kHalfLog2Pi;
  }
  return total / static_cast<double>(Q);
}

} // namespace

double mc_log_likelihood(const Tensor2 &samples, double tau, std::span<const double> targets) {
  require_tau(tau);
  const double v = 1.0 / tau;
  return log_likelihood_impl(samples, targets, [v](std::size_t, std::size_t) { return v; });
}

double mc_log_likelihood(const Tensor2 &samples, const Tensor2 &noise_var,
                         std::span<const double> targets) {
  if (!noise_var.same_shape(samples)) {
    throw ShapeError("mc_log_likelihood: noise " + noise_var.shape_string() + " vs samples " +
                     samples.shape_string());
  }
  for (double v : noise_var.data()) {
    if (!(v > 0.0)) throw std::domain_error("mc_log_likelihood: noise variance must be positive");
  }
  return log_likelihood_impl(samples, targets,
                             [&](std::size_t t, std::size_t q) { return noise_var(t, q); });
}

std::vector<CurveRow> predictive_curve(const Network &net, std::span<const double> x_grid,
                                       std::size_t T, double tau, NoiseMode mode, Rng &rng,
                                       const NormStats &norm) {
  if (net.input_width() != 1) throw ContractError("predictive_curve needs a 1-D input network");
  if (x_grid.empty()) throw ContractError("predictive_curve: empty grid");
  const Tensor2 queries = Tensor2::column_vector(x_grid);
  const PredictiveDistribution d = mode == NoiseMode::homo
                                       ? mc_predict(net, queries, T, tau, rng, norm)
                                       : mc_predict_hetero(net, queries, T, rng, norm);
  const std::vector<double> standard = predict_standard(net, queries, norm);
  std::vector<CurveRow> rows;
  rows.reserve(x_grid.size());
  for (std::size_t q = 0; q < x_grid.size(); ++q) {
    const double epi = 2.0 * std::sqrt(d.epistemic_var[q]);
    const double tot = 2.0 * std::sqrt(d.total_var[q]);
    rows.push_back({x_grid[q], d.mean[q], standard[q], d.mean[q] - epi, d.mean[q] + epi,
                    d.mean[q] - tot, d.mean[q] + tot, d.epistemic_var[q], d.total_var[q]});
  }
  return rows;
}

void write_curve(std::ostream &os, std::span<const CurveRow> rows) {
  os << "x,mc_mean,std_pred,epi_lo,epi_hi,tot_lo,tot_hi\n";
  os << std::setprecision(17);
  for (const CurveRow &r : rows) {
    os << r.x << ',' << r.mc_mean << ',' << r.std_pred << ',' << r.epi_lo << ',' << r.epi_hi << ','
       << r.tot_lo << ',' << r.tot_hi << '\n';
  }
}

} // namespace mcdrop
