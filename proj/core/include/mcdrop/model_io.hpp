#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "mcdrop/data.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/training.hpp"

namespace mcdrop {

inline constexpr char kModelMagic[4] = {'M', 'C', 'D', 'W'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

/// A trained network plus what prediction needs to work in original units.
struct SavedModel {
  Network network;
  NormStats norm;
  /// Homoscedastic precision used for the predictive noise term.
  double tau = 1.0;
};

/// Little-endian binary layout:
///
///   char[4]  magic "MCDW"
///   u32      format version (1)
///   u32      output heads (0 single, 1 mean_and_logvar)
///   u32      layer count L
///   L ×      { u32 in_width, u32 out_width, u32 nonlinearity (0 relu, 1 tanh,
///              2 identity), f64 retain_prob }
///   L ×      { f64[in·out] weights row-major, f64[out] bias }
///   u32      has_norm
///   if has_norm: u32 D, f64[D] x_mean, f64[D] x_std, f64 y_mean, f64 y_std
///   f64      tau
void write_model(std::ostream &os, const SavedModel &model);
SavedModel read_model(std::istream &is);

void save_model(const std::filesystem::path &path, const SavedModel &model);
SavedModel load_model(const std::filesystem::path &path);

/// Training provenance recorded in the human-readable sidecar.
struct ModelProvenance {
  std::optional<HyperParams> hyper;
  std::optional<TrainConfig> config;
  std::string dataset;
};

/// JSON manifest: layer sizes, retain probabilities, nonlinearities, heads,
/// normalization and training hyperparameters.
std::string model_manifest(const SavedModel &model, const ModelProvenance &prov = {});
/// `<model path>.manifest.json`
std::filesystem::path manifest_path(const std::filesystem::path &model_path);

} // namespace mcdrop
