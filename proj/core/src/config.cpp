#include "mcdrop/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mcdrop/errors.hpp"

namespace mcdrop {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string &v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

double to_double(const std::string &s) {
  double v = 0.0;
  const std::string t = trim(s);
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size()) {
    throw std::invalid_argument("'" + s + "' is not a number");
  }
  return v;
}

std::uint64_t to_u64(const std::string &s) {
  std::uint64_t v = 0;
  const std::string t = trim(s);
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size()) {
    throw std::invalid_argument("'" + s + "' is not a non-negative integer");
  }
  return v;
}

std::size_t to_size(const std::string &s) { return static_cast<std::size_t>(to_u64(s)); }

int to_int(const std::string &s) {
  int v = 0;
  const std::string t = trim(s);
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size()) {
    throw std::invalid_argument("'" + s + "' is not an integer");
  }
  return v;
}

bool to_bool(const std::string &s) {
  const std::string t = trim(s);
  if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
  if (t == "0" || t == "false" || t == "no" || t == "off") return false;
  throw std::invalid_argument("'" + s + "' is not a boolean");
}

template <typename F> auto to_list(const std::string &v, F f) {
  std::vector<decltype(f(std::string{}))> out;
  for (const auto &item : split_list(v)) out.push_back(f(item));
  return out;
}

using Setter = std::function<void(ExperimentConfig &, const std::string &)>;

const std::map<std::string, Setter> &setters() {
  static const std::map<std::string, Setter> table = {
      {"data", [](auto &c, auto &v) { c.data_path = trim(v); }},
      {"name", [](auto &c, auto &v) { c.dataset_name = trim(v); }},
      {"target", [](auto &c, auto &v) { c.target_column = to_int(v); }},
      {"delimiter", [](auto &c, auto &v) { c.delimiter = v.empty() ? "," : v; }},
      {"header", [](auto &c, auto &v) { c.has_header = to_bool(v); }},
      {"toy_n", [](auto &c, auto &v) { c.toy_n = to_size(v); }},
      {"toy_lo", [](auto &c, auto &v) { c.toy_lo = to_double(v); }},
      {"toy_hi", [](auto &c, auto &v) { c.toy_hi = to_double(v); }},
      {"toy_noise_sd", [](auto &c, auto &v) { c.toy_noise_sd = to_double(v); }},
      {"grid_points", [](auto &c, auto &v) { c.grid_points = to_size(v); }},
      {"hidden_layers", [](auto &c, auto &v) { c.hidden_layers = to_size(v); }},
      {"width", [](auto &c, auto &v) { c.width = to_size(v); }},
      {"nonlinearities",
       [](auto &c, auto &v) {
         c.nonlinearities = to_list(v, [](const std::string &s) { return parse_nonlinearity(s); });
       }},
      {"input_dropout", [](auto &c, auto &v) { c.input_dropout = to_bool(v); }},
      {"dropout_rates", [](auto &c, auto &v) { c.dropout_rates = to_list(v, to_double); }},
      {"taus", [](auto &c, auto &v) { c.taus = to_list(v, to_double); }},
      {"length_scale", [](auto &c, auto &v) { c.length_scale = to_double(v); }},
      {"epochs", [](auto &c, auto &v) { c.epochs = to_list(v, to_size); }},
      {"T", [](auto &c, auto &v) { c.T = to_size(v); }},
      {"t_values", [](auto &c, auto &v) { c.t_values = to_list(v, to_size); }},
      {"layers_list", [](auto &c, auto &v) { c.layers_list = to_list(v, to_size); }},
      {"widths", [](auto &c, auto &v) { c.widths = to_list(v, to_size); }},
      {"n_splits", [](auto &c, auto &v) { c.n_splits = to_size(v); }},
      {"test_fraction", [](auto &c, auto &v) { c.test_fraction = to_double(v); }},
      {"master_seed", [](auto &c, auto &v) { c.master_seed = to_u64(v); }},
      {"mode",
       [](auto &c, auto &v) {
         const std::string t = trim(v);
         if (t == "mc") c.mode = PredictorMode::mc;
         else if (t == "standard") c.mode = PredictorMode::standard;
         else if (t == "both") c.mode = PredictorMode::both;
         else throw std::invalid_argument("mode must be mc, standard or both");
       }},
      {"noise",
       [](auto &c, auto &v) {
         const std::string t = trim(v);
         if (t == "homo") c.noise = NoiseModel::homo;
         else if (t == "hetero") c.noise = NoiseModel::hetero;
         else throw std::invalid_argument("noise must be homo or hetero");
       }},
      {"checkpoint", [](auto &c, auto &v) { c.checkpoint = to_bool(v); }},
      {"batch_size", [](auto &c, auto &v) { c.batch_size = to_size(v); }},
      {"learning_rate", [](auto &c, auto &v) { c.learning_rate = to_double(v); }},
      {"workers", [](auto &c, auto &v) { c.workers = to_size(v); }},
      {"out", [](auto &c, auto &v) { c.output_dir = trim(v); }},
  };
  return table;
}

} // namespace

double retain_from_rate(double dropout_rate) {
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1), got " +
                                std::to_string(dropout_rate));
  }
  return 1.0 - dropout_rate;
}

void ExperimentConfig::validate() const {
  for (double d : dropout_rates) retain_from_rate(d);
  for (double t : taus)
    if (!(t > 0.0)) throw std::invalid_argument("tau values must be positive");
  if (!(length_scale > 0.0)) throw std::invalid_argument("length_scale must be positive");
  if (epochs.empty()) throw std::invalid_argument("epochs list is empty");
  if (T < 2) throw std::invalid_argument("T must be at least 2");
  for (std::size_t t : t_values)
    if (t < 2) throw std::invalid_argument("t_values must be at least 2");
  if (hidden_layers == 0 || width == 0) throw std::invalid_argument("network shape must be positive");
  for (std::size_t l : layers_list)
    if (l == 0) throw std::invalid_argument("layers_list entries must be positive");
  for (std::size_t w : widths)
    if (w == 0) throw std::invalid_argument("widths entries must be positive");
  if (n_splits == 0) throw std::invalid_argument("n_splits must be positive");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  }
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (toy_n == 0 || !(toy_lo < toy_hi) || !(toy_noise_sd >= 0.0)) {
    throw std::invalid_argument("invalid toy generator settings");
  }
  if (grid_points < 2) throw std::invalid_argument("grid_points must be at least 2");
}

void apply_config_key(ExperimentConfig &cfg, const std::string &key, const std::string &value) {
  const auto &table = setters();
  auto it = table.find(trim(key));
  if (it == table.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  try {
    it->second(cfg, value);
  } catch (const std::invalid_argument &e) {
    throw std::invalid_argument("config key '" + trim(key) + "': " + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path &path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(n) + ": expected key = value", n);
    }
    try {
      apply_config_key(base, line.substr(0, eq), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument &e) {
      throw ParseError(path.string() + ":" + std::to_string(n) + ": " + e.what(), n);
    }
  }
  return base;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto &[k, _] : setters()) keys.push_back(k);
  return keys;
}

} // namespace mcdrop
