#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "mcdrop/data.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/random.hpp"

namespace mcdrop {

/// Monte Carlo predictive distribution over Q query points from T stochastic
/// passes, in the units the caller asked for (see NormStats arguments below).
struct PredictiveDistribution {
  /// T×Q mean-head outputs.
  Tensor2 samples;
  std::vector<double> mean;
  /// (1/T) Σ f_t² − mean², population form.
  std::vector<double> epistemic_var;
  /// Observation noise per query: τ⁻¹, or (1/T) Σ τ_t(x)⁻¹ for the
  /// heteroscedastic model.
  std::vector<double> noise_var;
  /// epistemic_var + noise_var.
  std::vector<double> total_var;
  /// Homoscedastic precision; empty for the heteroscedastic model.
  std::optional<double> tau;
  /// Heteroscedastic only: T×Q per-pass noise variances exp(s_t(x)).
  std::optional<Tensor2> sample_noise_var;

  std::size_t passes() const noexcept { return samples.rows(); }
  std::size_t queries() const noexcept { return samples.cols(); }
};

/// Moments of a T×Q sample matrix. Computed around the first sample so that
/// identical passes give exactly zero variance.
PredictiveDistribution summarize_samples(Tensor2 samples, double tau);

/// T masked passes with masks drawn from independent per-pass streams seeded
/// from one draw of `rng`; the result does not depend on pass evaluation
/// order. Queries are in original feature units and are transformed with
/// `norm`; outputs and variances are mapped back to original target units.
PredictiveDistribution mc_predict(const Network &net, const Tensor2 &queries, std::size_t T,
                                  double tau, Rng &rng, const NormStats &norm = {});

/// Heteroscedastic variant: the network's second head is the log-variance
/// s(x), so τ(x)⁻¹ = exp(s(x)).
PredictiveDistribution mc_predict_hetero(const Network &net, const Tensor2 &queries,
                                         std::size_t T, Rng &rng, const NormStats &norm = {});

/// Standard-dropout point predictions (deterministic).
std::vector<double> predict_standard(const Network &net, const Tensor2 &queries,
                                     const NormStats &norm = {});

double rmse(std::span<const double> predictions, std::span<const double> targets);

/// Mean over points of log[(1/T) Σ_t N(y; f_t, τ⁻¹)], evaluated with log-sum-exp.
double mc_log_likelihood(const Tensor2 &samples, double tau, std::span<const double> targets);
/// Same with per-pass, per-point noise variances (heteroscedastic model).
double mc_log_likelihood(const Tensor2 &samples, const Tensor2 &noise_var,
                         std::span<const double> targets);

enum class NoiseMode { homo, hetero };

struct CurveRow {
  double x;
  double mc_mean;
  double std_pred;
  double epi_lo;
  double epi_hi;
  double tot_lo;
  double tot_hi;
  /// Not part of the curve file; kept for analysis.
  double epistemic_var;
  double total_var;
};

/// Predictive bands over a 1-D input grid: MC mean, standard-dropout
/// prediction, mean ± 2 sd for the epistemic and the total variance. `tau`
/// is ignored in hetero mode.
std::vector<CurveRow> predictive_curve(const Network &net, std::span<const double> x_grid,
                                       std::size_t T, double tau, NoiseMode mode, Rng &rng,
                                       const NormStats &norm = {});

/// Header: x,mc_mean,std_pred,epi_lo,epi_hi,tot_lo,tot_hi
void write_curve(std::ostream &os, std::span<const CurveRow> rows);

} // namespace mcdrop
