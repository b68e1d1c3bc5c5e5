#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mcdrop/config.hpp"
#include "mcdrop/data.hpp"
#include "mcdrop/inference.hpp"
#include "mcdrop/network.hpp"

namespace mcdrop {

/// Worker count: explicit request, else MCDROP_WORKERS, else hardware
/// concurrency (at least 1).
std::size_t resolve_workers(std::size_t requested);

/// Runs task(i) for i in [0, n) on up to `workers` threads. Tasks must not
/// throw; results are written by index so completion order is irrelevant.
void run_parallel(std::size_t n, std::size_t workers, const std::function<void(std::size_t)> &task);

/// Mean and standard error (sample std with n-1 denominator over sqrt(n)).
struct Summary {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};
Summary summarize(std::span<const double> values);

struct FiveNumber {
  double min, q1, median, q3, max;
};
/// Quartiles by linear interpolation between order statistics.
FiveNumber five_number(std::vector<double> values);

/// One (cell, split) evaluation. MC and standard-dropout scores come from the
/// same trained weights, identified by `fingerprint`.
struct CellResult {
  std::size_t cell = 0;
  std::size_t split = 0;
  double dropout_rate = 0.0;
  double tau = 0.0;
  std::size_t epochs = 0;
  std::size_t hidden_layers = 0;
  std::size_t width = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double rmse_mc = 0.0;
  double ll_mc = 0.0;
  double rmse_std = 0.0;
  double ll_std = 0.0;
  std::uint64_t fingerprint = 0;
  bool ok = true;
  std::string error;
  /// Not persisted in the raw file.
  double wall_seconds = 0.0;
};

struct CellAggregate {
  std::size_t cell = 0;
  double dropout_rate = 0.0;
  double tau = 0.0;
  std::size_t epochs = 0;
  std::size_t hidden_layers = 0;
  std::size_t width = 0;
  std::size_t failures = 0;
  Summary rmse_mc, ll_mc, rmse_std, ll_std;
  FiveNumber box_rmse_mc{}, box_rmse_std{};
};

struct ExperimentResult {
  std::vector<CellResult> raw;
  std::vector<CellAggregate> aggregates;

  std::size_t failures() const;
};

/// Groups successful rows by cell and recomputes every aggregate.
std::vector<CellAggregate> aggregate(std::span<const CellResult> raw);

void write_raw(std::ostream &os, std::span<const CellResult> raw);
std::vector<CellResult> read_raw(std::istream &is);
void write_aggregate(std::ostream &os, std::span<const CellAggregate> agg);
void write_box(std::ostream &os, std::span<const CellAggregate> agg);
void write_timings(std::ostream &os, std::span<const CellResult> raw);

// ---------------------------------------------------------------------------
// Toy study

struct ToyCell {
  Nonlinearity nonlinearity = Nonlinearity::relu;
  double dropout_rate = 0.1;
  double tau = 0.25;
  std::size_t epochs = 4000;
};

struct ToyCellResult {
  ToyCell cell;
  std::vector<CurveRow> curve;
  std::vector<double> epoch_loss;
  std::filesystem::path curve_file;
  bool ok = true;
  std::string error;
};

struct ToyStudyResult {
  Dataset data;
  std::vector<double> grid;
  std::vector<ToyCellResult> cells;

  std::size_t failures() const;
};

/// Toy-study preset: 1x100 network, input dropout on, every nonlinearity,
/// rate, tau and epoch value of the curve figures, and a learning rate small
/// enough for the 1/p^2 gains that input dropout on a 1-D input produces.
ExperimentConfig toy_defaults();

/// The toy set for a config: toy_n points from the cubic generator.
Dataset toy_dataset(const ExperimentConfig &cfg);
/// Evenly spaced grid over [toy_lo, toy_hi].
std::vector<double> toy_grid(const ExperimentConfig &cfg);
/// Cells: nonlinearities × dropout_rates × taus × epochs.
std::vector<ToyCell> toy_cells(const ExperimentConfig &cfg);

ToyCellResult run_toy_cell(const ExperimentConfig &cfg, const Dataset &toy,
                           std::span<const double> grid, const ToyCell &cell,
                           std::size_t cell_index);

/// Trains one network per cell and, when `write_files`, writes under
/// cfg.output_dir: toy_train.csv, toy_truth.csv, and per cell a curve file
/// and a loss trace.
ToyStudyResult run_toy_study(const ExperimentConfig &cfg, bool write_files = true);

// ---------------------------------------------------------------------------
// UCI-style studies

/// Cells: dropout_rates × taus × epochs (row-major in that order).
/// For every (cell, split): normalize on train, train, then score MC and
/// standard dropout on the test rows in original units. Failures are recorded
/// per row; remaining rows still run. Writes raw.csv, aggregate.csv, box.csv
/// and timings.csv under cfg.output_dir when `write_files`.
ExperimentResult run_uci_study(const ExperimentConfig &cfg, const Dataset &data,
                               bool write_files = true);

struct EpochsRow {
  std::size_t epochs;
  Summary rmse;
  Summary ll;
};

struct EpochsReport {
  ExperimentResult result;
  std::vector<EpochsRow> rows;
};

/// Independent trainings per epoch budget for the first (rate, tau) of cfg.
EpochsReport run_epochs_study(const ExperimentConfig &cfg, const Dataset &data,
                              bool write_files = true);
std::string format_epochs_report(const EpochsReport &report, PredictorMode mode);

struct TSweepRow {
  std::size_t hidden_layers;
  std::size_t width;
  std::size_t T;
  std::size_t split;
  double rmse_mc;
  double ll_mc;
};

struct TSweepCell {
  std::size_t hidden_layers;
  std::size_t width;
  std::size_t T;
  Summary rmse;
};

struct TSweepResult {
  std::vector<TSweepRow> rows;
  std::vector<TSweepCell> grid;
  std::vector<std::string> errors;
};

/// One training per (layers, width, split) at cfg.epochs.back(); every T in
/// cfg.t_values re-uses it. Writes tsweep_raw.csv and tsweep_grid.csv.
TSweepResult run_T_study(const ExperimentConfig &cfg, const Dataset &data,
                         bool write_files = true);

/// Loads cfg.data_path with cfg's delimiter, header and target settings.
Dataset load_config_dataset(const ExperimentConfig &cfg);

} // namespace mcdrop
