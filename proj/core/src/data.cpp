#include "mcdrop/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "mcdrop/random.hpp"

namespace mcdrop {

Tensor2 NormStats::transform_x(const Tensor2 &x) const {
  if (x_mean.empty()) return x;
  if (x.cols() != x_mean.size()) {
    throw ShapeError("normalization: " + std::to_string(x_mean.size()) + " columns vs input " +
                     x.shape_string());
  }
  Tensor2 out = x;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = (x(r, c) - x_mean[c]) / x_std[c];
  return out;
}

Tensor2 NormStats::inverse_x(const Tensor2 &x) const {
  if (x_mean.empty()) return x;
  if (x.cols() != x_mean.size()) {
    throw ShapeError("normalization: " + std::to_string(x_mean.size()) + " columns vs input " +
                     x.shape_string());
  }
  Tensor2 out = x;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = x(r, c) * x_std[c] + x_mean[c];
  return out;
}

Dataset::Dataset(Tensor2 x_, Tensor2 y_, std::vector<std::string> names)
    : x(std::move(x_)), y(std::move(y_)), feature_names(std::move(names)) {
  if (x.rows() != y.rows()) {
    throw ShapeError("dataset: x " + x.shape_string() + " and y " + y.shape_string() +
                     " row counts differ");
  }
  if (y.cols() != 1) throw ShapeError("dataset: y must be a column, got " + y.shape_string());
}

std::vector<double> Dataset::targets() const { return {y.data().begin(), y.data().end()}; }

Dataset make_toy_cubic_at(std::span<const double> xs, double noise_sd, std::uint64_t seed) {
  if (xs.empty()) throw std::domain_error("make_toy_cubic: need at least one point");
  if (!(noise_sd >= 0.0)) throw std::domain_error("make_toy_cubic: noise_sd must be >= 0");
  Rng rng(seed);
  std::vector<double> ys;
  ys.reserve(xs.size());
  for (double x : xs) ys.push_back(x * x * x + (noise_sd > 0.0 ? rng.normal(0.0, noise_sd) : 0.0));
  return Dataset(Tensor2::column_vector(xs), Tensor2::column_vector(ys), {"x"});
}

Dataset make_toy_cubic(std::size_t n, double x_lo, double x_hi, double noise_sd,
                       std::uint64_t seed) {
  if (n == 0) throw std::domain_error("make_toy_cubic: n must be >= 1");
  if (!(x_lo < x_hi)) throw std::domain_error("make_toy_cubic: need x_lo < x_hi");
  if (!(noise_sd >= 0.0)) throw std::domain_error("make_toy_cubic: noise_sd must be >= 0");
  // Separate streams so the inputs do not depend on the noise level.
  Rng xr(derive_seed(seed, {0}));
  std::vector<double> xs(n);
  for (double &x : xs) x = xr.uniform(x_lo, x_hi);
  return make_toy_cubic_at(xs, noise_sd, derive_seed(seed, {1}));
}

Delimiter parse_delimiter(const std::string &name) {
  if (name == "," || name == "comma") return Delimiter::comma();
  if (name == " " || name == "space" || name == "whitespace" || name == "ws") {
    return Delimiter::whitespace();
  }
  if (name == "tab" || name == "\t") return {'\t'};
  if (name == ";" || name == "semicolon") return {';'};
  throw std::invalid_argument("unknown delimiter '" + name + "'");
}

namespace {

std::vector<std::string> split_line(const std::string &line, Delimiter d) {
  std::vector<std::string> fields;
  if (d.is_whitespace()) {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      fields.push_back(line.substr(i, j - i));
      i = j;
    }
    return fields;
  }
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(d.ch, start);
    fields.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::string trim(std::string s) {
  auto blank = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '"'; };
  while (!s.empty() && blank(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && blank(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

struct Table {
  std::vector<std::string> header;
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

Table read_table(const std::filesystem::path &path, Delimiter delimiter, bool has_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  Table t;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_line(line, delimiter);
    if (header_pending) {
      for (auto &f : fields) t.header.push_back(trim(f));
      t.cols = fields.size();
      header_pending = false;
      continue;
    }
    if (t.cols == 0) t.cols = fields.size();
    if (fields.size() != t.cols) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.cols) +
                           " fields, found " + std::to_string(fields.size()),
                       line_no);
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string f = trim(fields[c]);
      double v = 0.0;
      const char *b = f.data();
      const char *e = f.data() + f.size();
      auto [ptr, ec] = std::from_chars(b, e, v);
      if (f.empty() || ec != std::errc() || ptr != e || !std::isfinite(v)) {
        throw ParseError("line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                             ": '" + f + "' is not a finite number",
                         line_no, c + 1);
      }
      t.values.push_back(v);
    }
    ++t.rows;
  }
  if (t.rows == 0) throw ParseError("'" + path.string() + "' has no data rows", line_no);
  return t;
}

} // namespace

Dataset load_delimited(const std::filesystem::path &path, int target_column, Delimiter delimiter,
                       bool has_header) {
  Table t = read_table(path, delimiter, has_header);
  if (t.cols < 2) throw ParseError("need at least one feature and one target column", 1);
  const int ncols = static_cast<int>(t.cols);
  const int tc = target_column < 0 ? ncols + target_column : target_column;
  if (tc < 0 || tc >= ncols) {
    throw std::invalid_argument("target column " + std::to_string(target_column) +
                                " out of range for " + std::to_string(ncols) + " columns");
  }
  const auto target = static_cast<std::size_t>(tc);
  Tensor2 x(t.rows, t.cols - 1);
  Tensor2 y(t.rows, 1);
  for (std::size_t r = 0; r < t.rows; ++r) {
    std::size_t k = 0;
    for (std::size_t c = 0; c < t.cols; ++c) {
      const double v = t.values[r * t.cols + c];
      if (c == target) {
        y.at(r, 0) = v;
      } else {
        x.at(r, k++) = v;
      }
    }
  }
  std::vector<std::string> names;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != target) names.push_back(t.header[c]);
  return Dataset(std::move(x), std::move(y), std::move(names));
}

Tensor2 load_matrix(const std::filesystem::path &path, Delimiter delimiter, bool has_header) {
  Table t = read_table(path, delimiter, has_header);
  return Tensor2(t.rows, t.cols, std::move(t.values));
}

Fingerprint fingerprint(const Dataset &d) {
  Fingerprint f{d.size(), d.features() + 1, {}, {}};
  auto column = [&](std::size_t c) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t r = 0; r < d.size(); ++r) {
      const double v = c < d.features() ? d.x(r, c) : d.y(r, 0);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    f.min.push_back(lo);
    f.max.push_back(hi);
  };
  for (std::size_t c = 0; c <= d.features(); ++c) column(c);
  return f;
}

std::ostream &operator<<(std::ostream &os, const Fingerprint &f) {
  os << "rows=" << f.rows << " columns=" << f.columns;
  for (std::size_t c = 0; c < f.min.size(); ++c) {
    os << (c + 1 == f.min.size() ? " target" : " c" + std::to_string(c)) << "=[" << f.min[c] << ','
       << f.max[c] << ']';
  }
  return os;
}

NormStats compute_norm_stats(const Dataset &train) {
  const std::size_t n = train.size();
  if (n < 2) throw ContractError("normalize: need at least 2 rows");
  auto stats = [n](auto get) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += get(r);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (get(r) - mean) * (get(r) - mean);
    double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) sd = 1.0;
    return std::pair{mean, sd};
  };
  NormStats s;
  for (std::size_t c = 0; c < train.features(); ++c) {
    auto [m, sd] = stats([&](std::size_t r) { return train.x(r, c); });
    s.x_mean.push_back(m);
    s.x_std.push_back(sd);
  }
  auto [m, sd] = stats([&](std::size_t r) { return train.y(r, 0); });
  s.y_mean = m;
  s.y_std = sd;
  return s;
}

Dataset apply_normalization(const Dataset &d, const NormStats &stats) {
  Tensor2 y = d.y;
  for (double &v : y.mutable_data()) v = stats.transform_y(v);
  Dataset out(stats.transform_x(d.x), std::move(y), d.feature_names);
  out.normalization = stats;
  return out;
}

Dataset denormalize(const Dataset &d, const NormStats &stats) {
  Tensor2 y = d.y;
  for (double &v : y.mutable_data()) v = stats.inverse_y(v);
  return Dataset(stats.inverse_x(d.x), std::move(y), d.feature_names);
}

std::pair<Dataset, NormStats> normalize(const Dataset &train) {
  NormStats s = compute_norm_stats(train);
  return {apply_normalization(train, s), s};
}

std::vector<Split> make_splits(std::size_t n_rows, const SplitPlan &plan) {
  if (plan.n_splits == 0) throw ContractError("make_splits: n_splits must be positive");
  if (!(plan.test_fraction > 0.0 && plan.test_fraction < 1.0)) {
    throw ContractError("make_splits: test_fraction must lie in (0, 1)");
  }
  const auto n_test =
      static_cast<std::size_t>(std::llround(static_cast<double>(n_rows) * plan.test_fraction));
  if (n_test < 1 || n_rows < n_test + 2) {
    throw ContractError("make_splits: N=" + std::to_string(n_rows) + " with fraction " +
                        std::to_string(plan.test_fraction) +
                        " leaves fewer than 1 test or 2 train rows");
  }
  std::vector<Split> splits;
  splits.reserve(plan.n_splits);
  for (std::size_t i = 0; i < plan.n_splits; ++i) {
    std::vector<std::size_t> perm(n_rows);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(plan.master_seed, {0x5911, i}));
    // Fisher-Yates with our own uniform draws so the permutation does not
    // depend on the standard library's shuffle implementation.
    for (std::size_t k = n_rows - 1; k > 0; --k) {
      const auto j = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(k + 1));
      std::swap(perm[k], perm[std::min(j, k)]);
    }
    Split s;
    s.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.train.begin(), s.train.end());
    splits.push_back(std::move(s));
  }
  return splits;
}

std::vector<Split> make_splits(const Dataset &d, const SplitPlan &plan) {
  return make_splits(d.size(), plan);
}

Dataset subset(const Dataset &d, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ContractError("subset: no rows");
  Tensor2 x(rows.size(), d.features());
  Tensor2 y(rows.size(), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= d.size()) throw std::out_of_range("subset: row index out of range");
    for (std::size_t c = 0; c < d.features(); ++c) x.at(i, c) = d.x(rows[i], c);
    y.at(i, 0) = d.y(rows[i], 0);
  }
  Dataset out(std::move(x), std::move(y), d.feature_names);
  out.normalization = d.normalization;
  return out;
}

} // namespace mcdrop
