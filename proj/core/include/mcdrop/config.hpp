#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mcdrop/data.hpp"
#include "mcdrop/network.hpp"

namespace mcdrop {

enum class PredictorMode { mc, standard, both };
enum class NoiseModel { homo, hetero };

/// Everything an experiment needs. Loaded from a flat `key = value` file
/// (see `apply_config_key` for the keys); list values are comma separated.
struct ExperimentConfig {
  // dataset
  std::string data_path;
  std::string dataset_name;
  int target_column = -1;
  std::string delimiter = ",";
  bool has_header = false;

  // toy generator
  std::size_t toy_n = 20;
  double toy_lo = -4.0;
  double toy_hi = 4.0;
  double toy_noise_sd = 3.0;
  std::size_t grid_points = 100;

  // network
  std::size_t hidden_layers = 1;
  std::size_t width = 50;
  std::vector<Nonlinearity> nonlinearities = {Nonlinearity::relu};
  bool input_dropout = false;

  // grids; dropout rate d is the probability of dropping, p = 1 - d
  std::vector<double> dropout_rates = {0.1};
  std::vector<double> taus = {0.25};
  double length_scale = 1.0;
  std::vector<std::size_t> epochs = {4000};

  // prediction
  std::size_t T = 50;
  std::vector<std::size_t> t_values = {3, 10, 50, 100, 1000};
  std::vector<std::size_t> layers_list = {1};
  std::vector<std::size_t> widths = {50};

  // protocol
  std::size_t n_splits = 20;
  double test_fraction = 0.1;
  std::uint64_t master_seed = 0;
  PredictorMode mode = PredictorMode::both;
  NoiseModel noise = NoiseModel::homo;
  bool checkpoint = false;

  // optimizer
  std::size_t batch_size = 32;
  double learning_rate = 0.01;

  /// 0 = MCDROP_WORKERS or hardware concurrency.
  std::size_t workers = 0;
  std::filesystem::path output_dir = "results";

  /// Throws std::invalid_argument when a field violates its constraints.
  void validate() const;
};

/// Sets one field from its textual key/value. Unknown keys and malformed
/// values throw std::invalid_argument.
void apply_config_key(ExperimentConfig &cfg, const std::string &key, const std::string &value);
/// Reads `key = value` lines; `#` starts a comment.
ExperimentConfig load_config(const std::filesystem::path &path, ExperimentConfig base = {});
std::vector<std::string> config_keys();

double retain_from_rate(double dropout_rate);

} // namespace mcdrop
