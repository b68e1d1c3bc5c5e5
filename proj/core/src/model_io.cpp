#include "mcdrop/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

namespace mcdrop {

namespace {

void put_u32(std::ostream &os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char *>(b), 4);
}

void put_f64(std::ostream &os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char *>(b), 8);
}

void read_exact(std::istream &is, unsigned char *buf, std::size_t n) {
  is.read(reinterpret_cast<char *>(buf), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw IoError("model file truncated");
}

std::uint32_t get_u32(std::istream &is) {
  unsigned char b[4];
  read_exact(is, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream &is) {
  unsigned char b[8];
  read_exact(is, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

std::uint32_t nonlinearity_code(Nonlinearity n) {
  switch (n) {
  case Nonlinearity::relu: return 0;
  case Nonlinearity::tanh: return 1;
  case Nonlinearity::identity: return 2;
  }
  return 2;
}

Nonlinearity nonlinearity_from_code(std::uint32_t c) {
  switch (c) {
  case 0: return Nonlinearity::relu;
  case 1: return Nonlinearity::tanh;
  case 2: return Nonlinearity::identity;
  default: throw IoError("model file: unknown nonlinearity code " + std::to_string(c));
  }
}

// Guards allocations against corrupt headers.
constexpr std::uint32_t kMaxWidth = 1u << 20;
constexpr std::uint32_t kMaxLayers = 1024;

} // namespace

void write_model(std::ostream &os, const SavedModel &model) {
  const Network &net = model.network;
  os.write(kModelMagic, 4);
  put_u32(os, kModelFormatVersion);
  put_u32(os, net.heads() == OutputHeads::single ? 0 : 1);
  put_u32(os, static_cast<std::uint32_t>(net.num_layers()));
  for (const LayerSpec &l : net.layers()) {
    put_u32(os, static_cast<std::uint32_t>(l.in_width));
    put_u32(os, static_cast<std::uint32_t>(l.out_width));
    put_u32(os, nonlinearity_code(l.nonlinearity));
    put_f64(os, l.retain_prob);
  }
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    for (double v : net.weight(i).data()) put_f64(os, v);
    for (double v : net.bias(i).data()) put_f64(os, v);
  }
  const NormStats &n = model.norm;
  const bool has_norm = !n.is_identity();
  put_u32(os, has_norm ? 1 : 0);
  if (has_norm) {
    put_u32(os, static_cast<std::uint32_t>(n.x_mean.size()));
    for (double v : n.x_mean) put_f64(os, v);
    for (double v : n.x_std) put_f64(os, v);
    put_f64(os, n.y_mean);
    put_f64(os, n.y_std);
  }
  put_f64(os, model.tau);
  if (!os) throw IoError("failed writing model");
}

SavedModel read_model(std::istream &is) {
  unsigned char magic[4];
  read_exact(is, magic, 4);
  if (std::memcmp(magic, kModelMagic, 4) != 0) throw IoError("not a model file (bad magic)");
  const std::uint32_t version = get_u32(is);
  if (version != kModelFormatVersion) {
    throw IoError("unsupported model format version " + std::to_string(version));
  }
  const std::uint32_t heads_code = get_u32(is);
  if (heads_code > 1) throw IoError("model file: bad output head code");
  const std::uint32_t L = get_u32(is);
  if (L == 0 || L > kMaxLayers) throw IoError("model file: bad layer count");
  std::vector<LayerSpec> specs;
  for (std::uint32_t i = 0; i < L; ++i) {
    const std::uint32_t in = get_u32(is);
    const std::uint32_t out = get_u32(is);
    if (in == 0 || out == 0 || in > kMaxWidth || out > kMaxWidth) {
      throw IoError("model file: bad layer width");
    }
    const Nonlinearity nl = nonlinearity_from_code(get_u32(is));
    specs.push_back({in, out, nl, get_f64(is)});
  }
  std::vector<Tensor2> weights;
  std::vector<Tensor2> biases;
  for (const LayerSpec &l : specs) {
    std::vector<double> w(l.in_width * l.out_width);
    for (double &v : w) v = get_f64(is);
    std::vector<double> b(l.out_width);
    for (double &v : b) v = get_f64(is);
    weights.emplace_back(l.in_width, l.out_width, std::move(w));
    biases.emplace_back(1, l.out_width, std::move(b));
  }
  NormStats norm;
  if (get_u32(is) == 1) {
    const std::uint32_t d = get_u32(is);
    if (d > kMaxWidth) throw IoError("model file: bad normalization width");
    norm.x_mean.resize(d);
    norm.x_std.resize(d);
    for (double &v : norm.x_mean) v = get_f64(is);
    for (double &v : norm.x_std) v = get_f64(is);
    norm.y_mean = get_f64(is);
    norm.y_std = get_f64(is);
  }
  const double tau = get_f64(is);
  Network net(std::move(specs), std::move(weights), std::move(biases),
              heads_code == 0 ? OutputHeads::single : OutputHeads::mean_and_logvar);
  if (!norm.x_mean.empty() && norm.x_mean.size() != net.input_width()) {
    throw IoError("model file: normalization width does not match the network input");
  }
  return SavedModel{std::move(net), std::move(norm), tau};
}

void save_model(const std::filesystem::path &path, const SavedModel &model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  write_model(os, model);
}

SavedModel load_model(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return read_model(is);
}

std::string model_manifest(const SavedModel &model, const ModelProvenance &prov) {
  using nlohmann::json;
  const Network &net = model.network;
  json j;
  j["format"] = "MCDW";
  j["format_version"] = kModelFormatVersion;
  j["heads"] = net.heads() == OutputHeads::single ? "single" : "mean_and_logvar";
  j["parameters"] = net.parameter_count();
  j["fingerprint"] = net.fingerprint();
  json layers = json::array();
  for (const LayerSpec &l : net.layers()) {
    layers.push_back({{"in_width", l.in_width},
                      {"out_width", l.out_width},
                      {"nonlinearity", to_string(l.nonlinearity)},
                      {"retain_prob", l.retain_prob}});
  }
  j["layers"] = layers;
  j["tau"] = model.tau;
  if (!model.norm.is_identity()) {
    j["normalization"] = {{"x_mean", model.norm.x_mean},
                          {"x_std", model.norm.x_std},
                          {"y_mean", model.norm.y_mean},
                          {"y_std", model.norm.y_std}};
  }
  if (prov.hyper) {
    j["hyperparameters"] = {{"retain_prob", prov.hyper->retain_prob()},
                            {"tau", prov.hyper->tau()},
                            {"length_scale", prov.hyper->length_scale()},
                            {"weight_decay", prov.hyper->weight_decay()},
                            {"n_train", prov.hyper->n_train()}};
  }
  if (prov.config) {
    j["training"] = {{"epochs", prov.config->epochs},
                     {"batch_size", prov.config->batch_size},
                     {"learning_rate", prov.config->learning_rate},
                     {"objective", prov.config->objective == Objective::mse_homoscedastic
                                       ? "mse_homoscedastic"
                                       : "nll_heteroscedastic"},
                     {"seed", prov.config->seed}};
  }
  if (!prov.dataset.empty()) j["dataset"] = prov.dataset;
  return j.dump(2) + "\n";
}

std::filesystem::path manifest_path(const std::filesystem::path &model_path) {
  return model_path.string() + ".manifest.json";
}

} // namespace mcdrop
