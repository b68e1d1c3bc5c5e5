#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcdrop/tensor.hpp"

namespace mcdrop {

/// Per-column z-score statistics. A default-constructed value is the identity
/// transform (no x columns recorded, y mean 0, y std 1).
struct NormStats {
  std::vector<double> x_mean;
  std::vector<double> x_std;
  double y_mean = 0.0;
  double y_std = 1.0;

  bool is_identity() const noexcept { return x_mean.empty() && y_mean == 0.0 && y_std == 1.0; }
  Tensor2 transform_x(const Tensor2 &x) const;
  Tensor2 inverse_x(const Tensor2 &x) const;
  double transform_y(double y) const noexcept { return (y - y_mean) / y_std; }
  double inverse_y(double y) const noexcept { return y * y_std + y_mean; }

  friend bool operator==(const NormStats &, const NormStats &) = default;
};

/// Regression dataset: N×D features and N×1 targets.
struct Dataset {
  Tensor2 x;
  Tensor2 y;
  std::vector<std::string> feature_names;
  std::optional<NormStats> normalization;

  Dataset(Tensor2 x_, Tensor2 y_, std::vector<std::string> names = {});

  std::size_t size() const noexcept { return x.rows(); }
  std::size_t features() const noexcept { return x.cols(); }
  std::vector<double> targets() const;
};

/// x ~ U[x_lo, x_hi], y = x^3 + N(0, noise_sd^2).
Dataset make_toy_cubic(std::size_t n, double x_lo, double x_hi, double noise_sd, std::uint64_t seed);
/// Same generator with fixed inputs.
Dataset make_toy_cubic_at(std::span<const double> xs, double noise_sd, std::uint64_t seed);

/// Field separator for delimited files. `whitespace` splits on runs of blanks/tabs.
struct Delimiter {
  char ch = ',';
  static Delimiter comma() { return {','}; }
  static Delimiter whitespace() { return {' '}; }
  bool is_whitespace() const noexcept { return ch == ' '; }
};

Delimiter parse_delimiter(const std::string &name);

/// Reads a numeric table. `target_column` counts from 0; negative values count
/// from the end (-1 is the last column).
Dataset load_delimited(const std::filesystem::path &path, int target_column, Delimiter delimiter,
                       bool has_header);
/// Reads an all-feature table (no target column), e.g. prediction queries.
Tensor2 load_matrix(const std::filesystem::path &path, Delimiter delimiter, bool has_header);

struct Fingerprint {
  std::size_t rows;
  std::size_t columns;
  std::vector<double> min;
  std::vector<double> max;
};

/// Row/column counts and per-column ranges over features then target.
Fingerprint fingerprint(const Dataset &d);
std::ostream &operator<<(std::ostream &os, const Fingerprint &f);

/// z-scores every column with statistics of `train` alone. Constant columns
/// get std 1.
std::pair<Dataset, NormStats> normalize(const Dataset &train);
NormStats compute_norm_stats(const Dataset &train);
Dataset apply_normalization(const Dataset &d, const NormStats &stats);
Dataset denormalize(const Dataset &d, const NormStats &stats);

struct SplitPlan {
  std::size_t n_splits = 20;
  double test_fraction = 0.1;
  std::uint64_t master_seed = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Test size is round(N * test_fraction). Split i is a uniform shuffle seeded
/// by (master_seed, i).
std::vector<Split> make_splits(std::size_t n_rows, const SplitPlan &plan);
std::vector<Split> make_splits(const Dataset &d, const SplitPlan &plan);
Dataset subset(const Dataset &d, std::span<const std::size_t> rows);

} // namespace mcdrop
