#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "mcdrop/errors.hpp"

namespace mcdrop {

/// Dense row-major matrix of doubles. Every entry is finite.
///
/// Values are immutable through the public interface except via the explicit
/// mutable accessors used by optimizers and serializers; operations always
/// produce new tensors.
class Tensor2 {
public:
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  /// Builds from nested rows; all rows must have equal length.
  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor2 row_vector(std::span<const double> values);
  static Tensor2 column_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  double &at(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> mutable_data() noexcept { return data_; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  bool same_shape(const Tensor2 &o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_string() const;

  /// Bitwise equality of shape and data.
  friend bool operator==(const Tensor2 &, const Tensor2 &) = default;

private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

enum class Elementwise { relu, tanh, exp, log, square };

Tensor2 matmul(const Tensor2 &a, const Tensor2 &b);
/// a^T b without materializing the transpose.
Tensor2 matmul_tn(const Tensor2 &a, const Tensor2 &b);
/// a b^T without materializing the transpose.
Tensor2 matmul_nt(const Tensor2 &a, const Tensor2 &b);
Tensor2 transpose(const Tensor2 &a);

Tensor2 add(const Tensor2 &a, const Tensor2 &b);
Tensor2 sub(const Tensor2 &a, const Tensor2 &b);
Tensor2 hadamard(const Tensor2 &a, const Tensor2 &b);
Tensor2 scale(const Tensor2 &a, double s);
/// Adds a 1×cols row vector to every row of `a`.
Tensor2 add_row(const Tensor2 &a, const Tensor2 &row);
/// Multiplies every row of `a` elementwise by a 1×cols row vector.
Tensor2 mul_row(const Tensor2 &a, const Tensor2 &row);
/// Column sums as a 1×cols row vector.
Tensor2 sum_rows(const Tensor2 &a);
double sum(const Tensor2 &a);
double squared_norm(const Tensor2 &a);

/// Throws std::domain_error for log of non-positive entries or a non-finite
/// result (exp overflow).
Tensor2 elementwise(Elementwise kind, const Tensor2 &a);
const char *to_string(Elementwise kind) noexcept;

/// Throws std::domain_error naming `what` if any entry is NaN or infinite.
void require_finite(const Tensor2 &t, const char *what);

} // namespace mcdrop
