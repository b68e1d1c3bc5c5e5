#include "mcdrop/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mcdrop {

namespace {

void require_positive_dims(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("Tensor2 dimensions must be positive, got " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

[[noreturn]] void shape_mismatch(const char *op, const Tensor2 &a, const Tensor2 &b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

void require_same(const char *op, const Tensor2 &a, const Tensor2 &b) {
  if (!a.same_shape(b)) shape_mismatch(op, a, b);
}

template <typename F> Tensor2 zip(const Tensor2 &a, const Tensor2 &b, F f) {
  Tensor2 out(a.rows(), a.cols());
  auto x = a.data();
  auto y = b.data();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(x[i], y[i]);
  require_finite(out, "elementwise binary op");
  return out;
}

} // namespace

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  require_positive_dims(rows, cols);
  if (!std::isfinite(fill)) throw std::domain_error("Tensor2: non-finite fill value");
}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require_positive_dims(rows, cols);
  if (data_.size() != rows * cols) {
    throw ShapeError("Tensor2: data length " + std::to_string(data_.size()) + " does not match " +
                     shape_string());
  }
  require_finite(*this, "Tensor2 construction");
}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw ShapeError("Tensor2::from_rows: no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto &r : rows) {
    if (r.size() != cols) throw ShapeError("Tensor2::from_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor2(rows.size(), cols, std::move(data));
}

Tensor2 Tensor2::row_vector(std::span<const double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Tensor2 Tensor2::column_vector(std::span<const double> values) {
  return Tensor2(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::string Tensor2::shape_string() const {
  std::ostringstream os;
  os << '(' << rows_ << 'x' << cols_ << ')';
  return os.str();
}

Tensor2 matmul(const Tensor2 &a, const Tensor2 &b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  Tensor2 out(a.rows(), b.cols());
  const std::size_t n = a.cols(), m = b.cols();
  auto bd = b.data();
  auto od = out.mutable_data();
  // i-k-j order keeps the inner loop contiguous in both b and out.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double *orow = od.data() + i * m;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a(i, k);
      const double *brow = bd.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
  require_finite(out, "matmul");
  return out;
}

Tensor2 matmul_tn(const Tensor2 &a, const Tensor2 &b) {
  if (a.rows() != b.rows()) shape_mismatch("matmul_tn", a, b);
  Tensor2 out(a.cols(), b.cols());
  const std::size_t m = b.cols();
  auto bd = b.data();
  auto od = out.mutable_data();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double *brow = bd.data() + k * m;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      double *orow = od.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aki * brow[j];
    }
  }
  return out;
}

Tensor2 matmul_nt(const Tensor2 &a, const Tensor2 &b) {
  if (a.cols() != b.cols()) shape_mismatch("matmul_nt", a, b);
  Tensor2 out(a.rows(), b.rows());
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += arow[k] * brow[k];
      out.at(i, j) = acc;
    }
  }
  return out;
}

Tensor2 transpose(const Tensor2 &a) {
  Tensor2 out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a(i, j);
  return out;
}

Tensor2 add(const Tensor2 &a, const Tensor2 &b) {
  require_same("add", a, b);
  return zip(a, b, [](double x, double y) { return x + y; });
}

Tensor2 sub(const Tensor2 &a, const Tensor2 &b) {
  require_same("sub", a, b);
  return zip(a, b, [](double x, double y) { return x - y; });
}

Tensor2 hadamard(const Tensor2 &a, const Tensor2 &b) {
  require_same("hadamard", a, b);
  return zip(a, b, [](double x, double y) { return x * y; });
}

Tensor2 scale(const Tensor2 &a, double s) {
  Tensor2 out = a;
  for (double &v : out.mutable_data()) v *= s;
  require_finite(out, "scale");
  return out;
}

Tensor2 add_row(const Tensor2 &a, const Tensor2 &row) {
  if (row.rows() != 1 || row.cols() != a.cols()) shape_mismatch("add_row", a, row);
  Tensor2 out = a;
  auto r = row.data();
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) += r[j];
  return out;
}

Tensor2 mul_row(const Tensor2 &a, const Tensor2 &row) {
  if (row.rows() != 1 || row.cols() != a.cols()) shape_mismatch("mul_row", a, row);
  Tensor2 out = a;
  auto r = row.data();
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) *= r[j];
  return out;
}

Tensor2 sum_rows(const Tensor2 &a) {
  Tensor2 out(1, a.cols());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) o[j] += r[j];
  }
  return out;
}

double sum(const Tensor2 &a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

double squared_norm(const Tensor2 &a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

Tensor2 elementwise(Elementwise kind, const Tensor2 &a) {
  Tensor2 out = a;
  auto o = out.mutable_data();
  switch (kind) {
  case Elementwise::relu:
    for (double &v : o) v = v > 0.0 ? v : 0.0;
    break;
  case Elementwise::tanh:
    for (double &v : o) v = std::tanh(v);
    break;
  case Elementwise::exp:
    for (double &v : o) v = std::exp(v);
    require_finite(out, "exp");
    break;
  case Elementwise::log:
    for (double &v : o) {
      if (!(v > 0.0)) throw std::domain_error("log: non-positive entry " + std::to_string(v));
      v = std::log(v);
    }
    break;
  case Elementwise::square:
    for (double &v : o) v = v * v;
    require_finite(out, "square");
    break;
  }
  return out;
}

const char *to_string(Elementwise kind) noexcept {
  switch (kind) {
  case Elementwise::relu: return "relu";
  case Elementwise::tanh: return "tanh";
  case Elementwise::exp: return "exp";
  case Elementwise::log: return "log";
  case Elementwise::square: return "square";
  }
  return "?";
}

void require_finite(const Tensor2 &t, const char *what) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw std::domain_error(std::string(what) + ": non-finite value");
  }
}

} // namespace mcdrop
