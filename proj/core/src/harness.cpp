#include "mcdrop/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

#include "mcdrop/training.hpp"

namespace mcdrop {

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char *env = std::getenv("MCDROP_WORKERS")) {
    std::size_t v = 0;
    const std::string s(env);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && p == s.data() + s.size() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void run_parallel(std::size_t n, std::size_t workers, const std::function<void(std::size_t)> &task) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) task(i);
    });
  }
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.se = sd / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

FiveNumber five_number(std::vector<double> v) {
  if (v.empty()) throw ContractError("five_number: no values");
  std::sort(v.begin(), v.end());
  auto q = [&v](double f) {
    const double pos = f * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return v[lo] + w * (v[hi] - v[lo]);
  };
  return {v.front(), q(0.25), q(0.5), q(0.75), v.back()};
}

std::size_t ExperimentResult::failures() const {
  return static_cast<std::size_t>(
      std::count_if(raw.begin(), raw.end(), [](const CellResult &r) { return !r.ok; }));
}

std::size_t ToyStudyResult::failures() const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [](const ToyCellResult &r) { return !r.ok; }));
}

std::vector<CellAggregate> aggregate(std::span<const CellResult> raw) {
  std::map<std::size_t, std::vector<const CellResult *>> groups;
  for (const CellResult &r : raw) groups[r.cell].push_back(&r);
  std::vector<CellAggregate> out;
  for (const auto &[cell, rows] : groups) {
    CellAggregate a;
    a.cell = cell;
    a.dropout_rate = rows.front()->dropout_rate;
    a.tau = rows.front()->tau;
    a.epochs = rows.front()->epochs;
    a.hidden_layers = rows.front()->hidden_layers;
    a.width = rows.front()->width;
    std::vector<double> rm, lm, rs, ls;
    for (const CellResult *r : rows) {
      if (!r->ok) {
        ++a.failures;
        continue;
      }
      rm.push_back(r->rmse_mc);
      lm.push_back(r->ll_mc);
      rs.push_back(r->rmse_std);
      ls.push_back(r->ll_std);
    }
    a.rmse_mc = summarize(rm);
    a.ll_mc = summarize(lm);
    a.rmse_std = summarize(rs);
    a.ll_std = summarize(ls);
    if (!rm.empty()) {
      a.box_rmse_mc = five_number(rm);
      a.box_rmse_std = five_number(rs);
    }
    out.push_back(a);
  }
  return out;
}

namespace {

std::string sanitize(std::string s) {
  for (char &c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

std::string fmt_compact(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

template <typename T> T parse_field(const std::string &s) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError("raw results: bad field '" + s + "'", 0);
  }
  return v;
}

double parse_double_field(const std::string &s) {
  if (s == "nan") return std::nan("");
  return parse_field<double>(s);
}

constexpr const char *kRawHeader = "cell,split,dropout_rate,tau,epochs,hidden_layers,width,n_train,"
                                   "n_test,rmse_mc,ll_mc,rmse_std,ll_std,fingerprint,status,error";

} // namespace

void write_raw(std::ostream &os, std::span<const CellResult> raw) {
  os << kRawHeader << '\n' << std::setprecision(17);
  for (const CellResult &r : raw) {
    os << r.cell << ',' << r.split << ',' << r.dropout_rate << ',' << r.tau << ',' << r.epochs << ','
       << r.hidden_layers << ',' << r.width << ',' << r.n_train << ',' << r.n_test << ',';
    if (r.ok) {
      os << r.rmse_mc << ',' << r.ll_mc << ',' << r.rmse_std << ',' << r.ll_std;
    } else {
      os << "nan,nan,nan,nan";
    }
    os << ',' << std::hex << std::setw(16) << std::setfill('0') << r.fingerprint << std::dec
       << std::setfill(' ') << ',' << (r.ok ? "ok" : "failed") << ',' << sanitize(r.error) << '\n';
  }
}

std::vector<CellResult> read_raw(std::istream &is) {
  std::string line;
  if (!std::getline(is, line) || line != kRawHeader) {
    throw ParseError("raw results: unexpected header", 1);
  }
  std::vector<CellResult> rows;
  std::size_t n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (int k = 0; k < 15; ++k) {
      const auto pos = line.find(',', start);
      if (pos == std::string::npos) throw ParseError("raw results: short row", n);
      f.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    f.push_back(line.substr(start));
    CellResult r;
    r.cell = parse_field<std::size_t>(f[0]);
    r.split = parse_field<std::size_t>(f[1]);
    r.dropout_rate = parse_double_field(f[2]);
    r.tau = parse_double_field(f[3]);
    r.epochs = parse_field<std::size_t>(f[4]);
    r.hidden_layers = parse_field<std::size_t>(f[5]);
    r.width = parse_field<std::size_t>(f[6]);
    r.n_train = parse_field<std::size_t>(f[7]);
    r.n_test = parse_field<std::size_t>(f[8]);
    r.rmse_mc = parse_double_field(f[9]);
    r.ll_mc = parse_double_field(f[10]);
    r.rmse_std = parse_double_field(f[11]);
    r.ll_std = parse_double_field(f[12]);
    {
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(f[13].data(), f[13].data() + f[13].size(), v, 16);
      if (ec != std::errc()) throw ParseError("raw results: bad fingerprint", n);
      r.fingerprint = v;
    }
    r.ok = f[14] == "ok";
    r.error = f[15];
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_aggregate(std::ostream &os, std::span<const CellAggregate> agg) {
  os << "cell,dropout_rate,tau,epochs,hidden_layers,width,n_ok,failures,rmse_mc_mean,rmse_mc_se,"
        "ll_mc_mean,ll_mc_se,rmse_std_mean,rmse_std_se,ll_std_mean,ll_std_se\n"
     << std::setprecision(17);
  for (const CellAggregate &a : agg) {
    os << a.cell << ',' << a.dropout_rate << ',' << a.tau << ',' << a.epochs << ','
       << a.hidden_layers << ',' << a.width << ',' << a.rmse_mc.n << ',' << a.failures << ','
       << a.rmse_mc.mean << ',' << a.rmse_mc.se << ',' << a.ll_mc.mean << ',' << a.ll_mc.se << ','
       << a.rmse_std.mean << ',' << a.rmse_std.se << ',' << a.ll_std.mean << ',' << a.ll_std.se
       << '\n';
  }
}

void write_box(std::ostream &os, std::span<const CellAggregate> agg) {
  os << "cell,dropout_rate,tau,epochs,predictor,min,q1,median,q3,max\n" << std::setprecision(17);
  for (const CellAggregate &a : agg) {
    if (a.rmse_mc.n == 0) continue;
    for (int k = 0; k < 2; ++k) {
      const FiveNumber &b = k == 0 ? a.box_rmse_mc : a.box_rmse_std;
      os << a.cell << ',' << a.dropout_rate << ',' << a.tau << ',' << a.epochs << ','
         << (k == 0 ? "mc" : "standard") << ',' << b.min << ',' << b.q1 << ',' << b.median << ','
         << b.q3 << ',' << b.max << '\n';
    }
  }
}

void write_timings(std::ostream &os, std::span<const CellResult> raw) {
  os << "cell,split,wall_seconds\n";
  for (const CellResult &r : raw) os << r.cell << ',' << r.split << ',' << r.wall_seconds << '\n';
}

namespace {

void write_file(const std::filesystem::path &path, const std::function<void(std::ostream &)> &fn) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  fn(os);
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

// Stream coordinates; the third component distinguishes what the stream is for.
enum Stream : std::uint64_t { init_stream = 1, train_stream = 2, predict_stream = 3 };

NoiseMode noise_mode(const ExperimentConfig &cfg) {
  return cfg.noise == NoiseModel::homo ? NoiseMode::homo : NoiseMode::hetero;
}

MlpShape shape_for(const ExperimentConfig &cfg, std::size_t inputs, std::size_t layers,
                   std::size_t width, Nonlinearity nl, double retain) {
  MlpShape s;
  s.input_width = inputs;
  s.hidden_layers = layers;
  s.width = width;
  s.nonlinearity = nl;
  s.retain_prob = retain;
  s.input_dropout = cfg.input_dropout;
  s.heads = cfg.noise == NoiseModel::hetero ? OutputHeads::mean_and_logvar : OutputHeads::single;
  return s;
}

TrainConfig train_config(const ExperimentConfig &cfg, std::size_t epochs, std::size_t n_train,
                         std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = std::min(cfg.batch_size, n_train);
  tc.learning_rate = cfg.learning_rate;
  tc.objective = cfg.noise == NoiseModel::hetero ? Objective::nll_heteroscedastic
                                                 : Objective::mse_homoscedastic;
  tc.seed = seed;
  return tc;
}

struct Scores {
  double rmse_mc, ll_mc, rmse_std, ll_std;
};

Scores score(const ExperimentConfig &cfg, const Network &net, const Dataset &test,
             const NormStats &norm, double tau, std::uint64_t seed) {
  const std::vector<double> y = test.targets();
  Rng rng(seed);
  Scores s{};
  const std::vector<double> standard = predict_standard(net, test.x, norm);
  s.rmse_std = rmse(standard, y);
  if (cfg.noise == NoiseModel::homo) {
    const PredictiveDistribution d = mc_predict(net, test.x, cfg.T, tau, rng, norm);
    s.rmse_mc = rmse(d.mean, y);
    s.ll_mc = mc_log_likelihood(d.samples, tau, y);
    s.ll_std = mc_log_likelihood(Tensor2::row_vector(standard), tau, y);
  } else {
    const PredictiveDistribution d = mc_predict_hetero(net, test.x, cfg.T, rng, norm);
    s.rmse_mc = rmse(d.mean, y);
    s.ll_mc = mc_log_likelihood(d.samples, *d.sample_noise_var, y);
    const Tensor2 out = forward_scaled(net, norm.transform_x(test.x));
    Tensor2 noise(1, y.size());
    for (std::size_t q = 0; q < y.size(); ++q) {
      noise.at(0, q) = std::exp(out(q, 1)) * norm.y_std * norm.y_std;
    }
    s.ll_std = mc_log_likelihood(Tensor2::row_vector(standard), noise, y);
  }
  return s;
}

} // namespace

// ---------------------------------------------------------------------------
// Toy study

ExperimentConfig toy_defaults() {
  ExperimentConfig cfg;
  cfg.width = 100;
  cfg.input_dropout = true;
  cfg.learning_rate = 3e-5;
  cfg.nonlinearities = {Nonlinearity::relu, Nonlinearity::tanh};
  cfg.dropout_rates = {0.0, 0.1, 0.5, 0.9};
  cfg.taus = {0.01, 0.25, 10.0};
  cfg.epochs = {40, 400, 4000};
  cfg.output_dir = "results/toy";
  return cfg;
}

Dataset toy_dataset(const ExperimentConfig &cfg) {
  return make_toy_cubic(cfg.toy_n, cfg.toy_lo, cfg.toy_hi, cfg.toy_noise_sd,
                        derive_seed(cfg.master_seed, {0x70F}));
}

std::vector<double> toy_grid(const ExperimentConfig &cfg) {
  std::vector<double> g(cfg.grid_points);
  const double step = (cfg.toy_hi - cfg.toy_lo) / static_cast<double>(cfg.grid_points - 1);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = cfg.toy_lo + step * static_cast<double>(i);
  g.back() = cfg.toy_hi;
  return g;
}

std::vector<ToyCell> toy_cells(const ExperimentConfig &cfg) {
  std::vector<ToyCell> cells;
  for (Nonlinearity nl : cfg.nonlinearities)
    for (double rate : cfg.dropout_rates)
      for (double tau : cfg.taus)
        for (std::size_t e : cfg.epochs) cells.push_back({nl, rate, tau, e});
  return cells;
}

ToyCellResult run_toy_cell(const ExperimentConfig &cfg, const Dataset &toy,
                           std::span<const double> grid, const ToyCell &cell,
                           std::size_t cell_index) {
  ToyCellResult res;
  res.cell = cell;
  const double p = retain_from_rate(cell.dropout_rate);
  auto [train_set, norm] = normalize(toy);
  const std::size_t n = train_set.size();
  Network net = init_network(shape_for(cfg, 1, cfg.hidden_layers, cfg.width, cell.nonlinearity, p),
                             derive_seed(cfg.master_seed, {cell_index, 0, init_stream}));
  const HyperParams hyper = HyperParams::from_tau(p, cell.tau, cfg.length_scale, n);
  TrainResult tr = train(std::move(net), train_set, hyper,
                         train_config(cfg, cell.epochs, n,
                                      derive_seed(cfg.master_seed, {cell_index, 0, train_stream})));
  Rng rng(derive_seed(cfg.master_seed, {cell_index, 0, predict_stream}));
  res.curve = predictive_curve(tr.network, grid, cfg.T, cell.tau, noise_mode(cfg), rng, norm);
  res.epoch_loss = std::move(tr.epoch_loss);
  return res;
}

ToyStudyResult run_toy_study(const ExperimentConfig &cfg, bool write_files) {
  cfg.validate();
  ToyStudyResult study{toy_dataset(cfg), toy_grid(cfg), {}};
  const std::vector<ToyCell> cells = toy_cells(cfg);
  study.cells.resize(cells.size());
  run_parallel(cells.size(), resolve_workers(cfg.workers), [&](std::size_t i) {
    try {
      study.cells[i] = run_toy_cell(cfg, study.data, study.grid, cells[i], i);
    } catch (const std::exception &e) {
      study.cells[i].cell = cells[i];
      study.cells[i].ok = false;
      study.cells[i].error = "cell " + std::to_string(i) + " (" + to_string(cells[i].nonlinearity) +
                             ", rate " + fmt_compact(cells[i].dropout_rate) + ", tau " +
                             fmt_compact(cells[i].tau) + ", epochs " +
                             std::to_string(cells[i].epochs) + "): " + e.what();
    }
  });

  if (write_files) {
    const auto &dir = cfg.output_dir;
    write_file(dir / "toy_train.csv", [&](std::ostream &os) {
      os << "x,y\n" << std::setprecision(17);
      for (std::size_t i = 0; i < study.data.size(); ++i) {
        os << study.data.x(i, 0) << ',' << study.data.y(i, 0) << '\n';
      }
    });
    write_file(dir / "toy_truth.csv", [&](std::ostream &os) {
      os << "x,y\n" << std::setprecision(17);
      for (double x : study.grid) os << x << ',' << x * x * x << '\n';
    });
    for (ToyCellResult &c : study.cells) {
      if (!c.ok) continue;
      const std::string stem = std::string(to_string(c.cell.nonlinearity)) + "_rate" +
                               fmt_compact(c.cell.dropout_rate) + "_tau" +
                               fmt_compact(c.cell.tau) + "_ep" + std::to_string(c.cell.epochs) +
                               (cfg.noise == NoiseModel::hetero ? "_hetero" : "");
      c.curve_file = dir / ("curve_" + stem + ".csv");
      write_file(c.curve_file, [&](std::ostream &os) { write_curve(os, c.curve); });
      write_file(dir / ("loss_" + stem + ".csv"), [&](std::ostream &os) {
        os << "epoch,mean_loss\n" << std::setprecision(17);
        for (std::size_t e = 0; e < c.epoch_loss.size(); ++e) {
          os << e + 1 << ',' << c.epoch_loss[e] << '\n';
        }
      });
    }
  }
  return study;
}

// ---------------------------------------------------------------------------
// UCI study

namespace {

struct UciCell {
  double rate;
  double tau;
  std::size_t epochs;
};

std::vector<UciCell> uci_cells(const ExperimentConfig &cfg) {
  std::vector<UciCell> cells;
  for (double r : cfg.dropout_rates)
    for (double t : cfg.taus)
      for (std::size_t e : cfg.epochs) cells.push_back({r, t, e});
  return cells;
}

} // namespace

ExperimentResult run_uci_study(const ExperimentConfig &cfg, const Dataset &data, bool write_files) {
  cfg.validate();
  const std::vector<UciCell> cells = uci_cells(cfg);
  const std::vector<Split> splits =
      make_splits(data, SplitPlan{cfg.n_splits, cfg.test_fraction, cfg.master_seed});
  const Nonlinearity nl = cfg.nonlinearities.front();
  const std::size_t n_epochs = cfg.epochs.size();
  const std::size_t max_epochs = *std::max_element(cfg.epochs.begin(), cfg.epochs.end());

  ExperimentResult result;
  result.raw.resize(cells.size() * splits.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t s = 0; s < splits.size(); ++s) {
      CellResult &r = result.raw[c * splits.size() + s];
      r.cell = c;
      r.split = s;
      r.dropout_rate = cells[c].rate;
      r.tau = cells[c].tau;
      r.epochs = cells[c].epochs;
      r.hidden_layers = cfg.hidden_layers;
      r.width = cfg.width;
      r.n_train = splits[s].train.size();
      r.n_test = splits[s].test.size();
    }
  }

  // In checkpoint mode one training per (rate, tau, split) is scored at every
  // listed epoch; otherwise every row is its own training.
  const std::size_t n_tasks =
      cfg.checkpoint ? (cells.size() / n_epochs) * splits.size() : result.raw.size();

  run_parallel(n_tasks, resolve_workers(cfg.workers), [&](std::size_t task) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t s = task % splits.size();
    const std::size_t first_cell = cfg.checkpoint ? (task / splits.size()) * n_epochs
                                                  : task / splits.size();
    const std::size_t cell_span = cfg.checkpoint ? n_epochs : 1;
    try {
      const Dataset train_raw = subset(data, splits[s].train);
      const Dataset test = subset(data, splits[s].test);
      auto [train_set, norm] = normalize(train_raw);
      const UciCell &cell = cells[first_cell];
      const double p = retain_from_rate(cell.rate);
      const std::size_t n = train_set.size();
      // Seeds are keyed by the training identity, so a cell gets the same
      // streams whichever worker runs it.
      Network net = init_network(
          shape_for(cfg, data.features(), cfg.hidden_layers, cfg.width, nl, p),
          derive_seed(cfg.master_seed, {first_cell, s, init_stream}));
      const HyperParams hyper = HyperParams::from_tau(p, cell.tau, cfg.length_scale, n);
      auto record = [&](std::size_t c, const Network &trained) {
        const Scores sc = score(cfg, trained, test, norm, cells[c].tau,
                                derive_seed(cfg.master_seed, {c, s, predict_stream}));
        CellResult &r = result.raw[c * splits.size() + s];
        r.rmse_mc = sc.rmse_mc;
        r.ll_mc = sc.ll_mc;
        r.rmse_std = sc.rmse_std;
        r.ll_std = sc.ll_std;
        r.fingerprint = trained.fingerprint();
      };
      if (cfg.checkpoint) {
        train(std::move(net), train_set, hyper,
              train_config(cfg, max_epochs, n,
                           derive_seed(cfg.master_seed, {first_cell, s, train_stream})),
              [&](std::size_t epoch, const Network &snapshot) {
                for (std::size_t k = 0; k < cell_span; ++k) {
                  if (cells[first_cell + k].epochs == epoch) record(first_cell + k, snapshot);
                }
              });
      } else {
        TrainResult tr =
            train(std::move(net), train_set, hyper,
                  train_config(cfg, cell.epochs, n,
                               derive_seed(cfg.master_seed, {first_cell, s, train_stream})));
        record(first_cell, tr.network);
      }
    } catch (const std::exception &e) {
      for (std::size_t k = 0; k < cell_span; ++k) {
        CellResult &r = result.raw[(first_cell + k) * splits.size() + s];
        r.ok = false;
        r.error = e.what();
      }
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (std::size_t k = 0; k < cell_span; ++k) {
      result.raw[(first_cell + k) * splits.size() + s].wall_seconds = secs;
    }
  });

  result.aggregates = aggregate(result.raw);
  if (write_files) {
    const auto &dir = cfg.output_dir;
    write_file(dir / "raw.csv", [&](std::ostream &os) { write_raw(os, result.raw); });
    write_file(dir / "aggregate.csv", [&](std::ostream &os) { write_aggregate(os, result.aggregates); });
    write_file(dir / "box.csv", [&](std::ostream &os) { write_box(os, result.aggregates); });
    write_file(dir / "timings.csv", [&](std::ostream &os) { write_timings(os, result.raw); });
  }
  return result;
}

EpochsReport run_epochs_study(const ExperimentConfig &cfg, const Dataset &data, bool write_files) {
  ExperimentConfig c = cfg;
  c.dropout_rates = {cfg.dropout_rates.front()};
  c.taus = {cfg.taus.front()};
  EpochsReport report{run_uci_study(c, data, false), {}};
  for (const CellAggregate &a : report.result.aggregates) {
    EpochsRow row{a.epochs, a.rmse_mc, a.ll_mc};
    if (cfg.mode == PredictorMode::standard) row = {a.epochs, a.rmse_std, a.ll_std};
    report.rows.push_back(row);
  }
  if (write_files) {
    const auto &dir = cfg.output_dir;
    write_file(dir / "raw.csv", [&](std::ostream &os) { write_raw(os, report.result.raw); });
    write_file(dir / "aggregate.csv",
               [&](std::ostream &os) { write_aggregate(os, report.result.aggregates); });
    write_file(dir / "box.csv", [&](std::ostream &os) { write_box(os, report.result.aggregates); });
    write_file(dir / "timings.csv", [&](std::ostream &os) { write_timings(os, report.result.raw); });
    write_file(dir / "epochs_report.txt",
               [&](std::ostream &os) { os << format_epochs_report(report, cfg.mode); });
  }
  return report;
}

std::string format_epochs_report(const EpochsReport &report, PredictorMode mode) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  auto table = [&](const char *title, auto pick) {
    os << title << '\n';
    os << std::left << std::setw(14) << "" << std::setw(26) << "RMSE" << "LL" << '\n';
    for (const CellAggregate &a : report.result.aggregates) {
      const auto [rm, ll] = pick(a);
      std::ostringstream r, l;
      r << std::fixed << std::setprecision(6) << rm.mean << " +- " << rm.se;
      l << std::fixed << std::setprecision(6) << ll.mean << " +- " << ll.se;
      os << std::left << std::setw(14) << (std::to_string(a.epochs) + " Epochs") << std::setw(26)
         << r.str() << l.str() << '\n';
    }
  };
  if (mode != PredictorMode::standard) {
    table("MC dropout", [](const CellAggregate &a) { return std::pair{a.rmse_mc, a.ll_mc}; });
  }
  if (mode == PredictorMode::both) os << '\n';
  if (mode != PredictorMode::mc) {
    table("Standard dropout", [](const CellAggregate &a) { return std::pair{a.rmse_std, a.ll_std}; });
  }
  return os.str();
}

TSweepResult run_T_study(const ExperimentConfig &cfg, const Dataset &data, bool write_files) {
  cfg.validate();
  if (cfg.noise != NoiseModel::homo) throw ContractError("the T sweep uses the homoscedastic model");
  const std::vector<Split> splits =
      make_splits(data, SplitPlan{cfg.n_splits, cfg.test_fraction, cfg.master_seed});
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  for (std::size_t l : cfg.layers_list)
    for (std::size_t w : cfg.widths) shapes.emplace_back(l, w);
  const double p = retain_from_rate(cfg.dropout_rates.front());
  const double tau = cfg.taus.front();
  const std::size_t epochs = cfg.epochs.back();
  const std::size_t nT = cfg.t_values.size();

  TSweepResult result;
  std::vector<TSweepRow> rows(shapes.size() * splits.size() * nT);
  std::vector<std::string> errors(shapes.size() * splits.size());
  std::vector<char> ok(shapes.size() * splits.size(), 1);

  run_parallel(shapes.size() * splits.size(), resolve_workers(cfg.workers), [&](std::size_t task) {
    const std::size_t c = task / splits.size();
    const std::size_t s = task % splits.size();
    const auto [layers, width] = shapes[c];
    try {
      const Dataset test = subset(data, splits[s].test);
      auto [train_set, norm] = normalize(subset(data, splits[s].train));
      const std::size_t n = train_set.size();
      Network net = init_network(
          shape_for(cfg, data.features(), layers, width, cfg.nonlinearities.front(), p),
          derive_seed(cfg.master_seed, {c, s, init_stream}));
      TrainResult tr = train(std::move(net), train_set,
                             HyperParams::from_tau(p, tau, cfg.length_scale, n),
                             train_config(cfg, epochs, n,
                                          derive_seed(cfg.master_seed, {c, s, train_stream})));
      const std::vector<double> y = test.targets();
      for (std::size_t k = 0; k < nT; ++k) {
        const std::size_t T = cfg.t_values[k];
        Rng rng(derive_seed(cfg.master_seed, {c, s, predict_stream, T}));
        const PredictiveDistribution d = mc_predict(tr.network, test.x, T, tau, rng, norm);
        rows[task * nT + k] = {layers, width, T, s, rmse(d.mean, y),
                               mc_log_likelihood(d.samples, tau, y)};
      }
    } catch (const std::exception &e) {
      ok[task] = 0;
      errors[task] = "layers " + std::to_string(layers) + ", width " + std::to_string(width) +
                     ", split " + std::to_string(s) + ": " + e.what();
    }
  });

  for (std::size_t task = 0; task < ok.size(); ++task) {
    if (!ok[task]) {
      result.errors.push_back(errors[task]);
      continue;
    }
    for (std::size_t k = 0; k < nT; ++k) result.rows.push_back(rows[task * nT + k]);
  }
  for (const auto &[layers, width] : shapes) {
    for (std::size_t T : cfg.t_values) {
      std::vector<double> v;
      for (const TSweepRow &r : result.rows) {
        if (r.hidden_layers == layers && r.width == width && r.T == T) v.push_back(r.rmse_mc);
      }
      result.grid.push_back({layers, width, T, summarize(v)});
    }
  }

  if (write_files) {
    const auto &dir = cfg.output_dir;
    write_file(dir / "tsweep_raw.csv", [&](std::ostream &os) {
      os << "hidden_layers,width,T,split,rmse_mc,ll_mc\n" << std::setprecision(17);
      for (const TSweepRow &r : result.rows) {
        os << r.hidden_layers << ',' << r.width << ',' << r.T << ',' << r.split << ',' << r.rmse_mc
           << ',' << r.ll_mc << '\n';
      }
    });
    write_file(dir / "tsweep_grid.csv", [&](std::ostream &os) {
      os << "hidden_layers,width,T,n,rmse_mean,rmse_se\n" << std::setprecision(17);
      for (const TSweepCell &g : result.grid) {
        os << g.hidden_layers << ',' << g.width << ',' << g.T << ',' << g.rmse.n << ','
           << g.rmse.mean << ',' << g.rmse.se << '\n';
      }
    });
  }
  return result;
}

Dataset load_config_dataset(const ExperimentConfig &cfg) {
  if (cfg.data_path.empty()) throw std::invalid_argument("no dataset path configured");
  return load_delimited(cfg.data_path, cfg.target_column, parse_delimiter(cfg.delimiter),
                        cfg.has_header);
}

} // namespace mcdrop
