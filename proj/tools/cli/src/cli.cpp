#include "mcdrop/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcdrop/errors.hpp"
#include "mcdrop/harness.hpp"
#include "mcdrop/model_io.hpp"
#include "mcdrop/training.hpp"

namespace mcdrop {

namespace {

// Thrown while turning flags into a config; reported as a usage error.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValueFlag {
  const char *flag;
  const char *key;
  const char *help;
};

struct BoolFlag {
  const char *flag;
  const char *key;
  const char *help;
};

const std::vector<ValueFlag> &value_flags() {
  static const std::vector<ValueFlag> flags = {
      {"--data", "data", "Delimited data file (features then target)"},
      {"--name", "name", "Dataset label for reports"},
      {"--target", "target", "Target column index, negative counts from the end"},
      {"--delimiter", "delimiter", "comma, tab, semicolon, whitespace or a single character"},
      {"--rate", "dropout_rates", "Dropout rate(s), comma separated"},
      {"--tau", "taus", "Model precision value(s), comma separated"},
      {"--epochs", "epochs", "Epoch budget(s), comma separated"},
      {"--nonlin", "nonlinearities", "relu and/or tanh, comma separated"},
      {"--layers", "hidden_layers", "Number of hidden layers"},
      {"--width", "width", "Hidden layer width"},
      {"--length-scale", "length_scale", "Prior length scale"},
      {"--T", "T", "Stochastic forward passes per prediction"},
      {"--t-values", "t_values", "T values for the sweep"},
      {"--layers-list", "layers_list", "Hidden layer counts for the sweep"},
      {"--widths", "widths", "Widths for the sweep"},
      {"--splits", "n_splits", "Number of random train/test splits"},
      {"--test-fraction", "test_fraction", "Share of rows held out per split"},
      {"--mode", "mode", "mc, standard or both"},
      {"--noise", "noise", "homo or hetero"},
      {"--batch-size", "batch_size", "Mini-batch size"},
      {"--lr", "learning_rate", "SGD learning rate"},
      {"--toy-n", "toy_n", "Toy training points"},
      {"--grid-points", "grid_points", "Toy curve grid points"},
      {"--seed", "master_seed", "Master seed"},
      {"--workers", "workers", "Parallel workers (default MCDROP_WORKERS or all cores)"},
      {"--out", "out", "Output directory"},
  };
  return flags;
}

const std::vector<BoolFlag> &bool_flags() {
  static const std::vector<BoolFlag> flags = {
      {"--header", "header", "Data file has a header row"},
      {"--checkpoint", "checkpoint", "Score epoch budgets as snapshots of one run"},
      {"--input-dropout", "input_dropout", "Also drop raw input features"},
  };
  return flags;
}

// Config file first, then `--set key=value` pairs, then dedicated flags.
struct ConfigOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> bools;
  std::vector<std::pair<std::string, CLI::Option *>> value_opts;
  std::vector<std::pair<std::string, CLI::Option *>> bool_opts;

  void attach(CLI::App &app) {
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--set", sets, "Override a config key: --set key=value (repeatable)");
    for (const ValueFlag &f : value_flags()) {
      value_opts.emplace_back(f.key, app.add_option(f.flag, values[f.key], f.help));
    }
    for (const BoolFlag &f : bool_flags()) {
      bool_opts.emplace_back(f.key, app.add_flag(f.flag, bools[f.key], f.help));
    }
  }

  ExperimentConfig resolve(ExperimentConfig base) const {
    try {
      if (!config_path.empty()) base = load_config(config_path, std::move(base));
      for (const std::string &s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value");
        apply_config_key(base, s.substr(0, eq), s.substr(eq + 1));
      }
      for (const auto &[key, opt] : value_opts) {
        if (opt->count() > 0) apply_config_key(base, key, values.at(key));
      }
      for (const auto &[key, opt] : bool_opts) {
        if (opt->count() > 0) apply_config_key(base, key, bools.at(key) ? "true" : "false");
      }
      base.validate();
    } catch (const std::invalid_argument &e) {
      throw UsageError(e.what());
    } catch (const ParseError &e) {
      throw UsageError(e.what());
    } catch (const IoError &e) {
      throw UsageError(e.what());
    }
    return base;
  }
};

void print_aggregates(std::ostream &out, const ExperimentResult &r, PredictorMode mode) {
  out << std::fixed << std::setprecision(4);
  for (const CellAggregate &a : r.aggregates) {
    out << "cell " << a.cell << "  rate " << a.dropout_rate << "  tau " << a.tau << "  epochs "
        << a.epochs << "  splits " << a.rmse_mc.n;
    if (mode != PredictorMode::standard) {
      out << "  | MC rmse " << a.rmse_mc.mean << " +- " << a.rmse_mc.se << "  ll " << a.ll_mc.mean
          << " +- " << a.ll_mc.se;
    }
    if (mode != PredictorMode::mc) {
      out << "  | std rmse " << a.rmse_std.mean << " +- " << a.rmse_std.se << "  ll "
          << a.ll_std.mean << " +- " << a.ll_std.se;
    }
    out << '\n';
  }
  out << std::defaultfloat;
}

int report_failures(std::ostream &err, const ExperimentResult &r) {
  if (r.failures() == 0) return 0;
  err << r.failures() << " of " << r.raw.size() << " cell runs failed:\n";
  for (const CellResult &c : r.raw) {
    if (!c.ok) {
      err << "  cell " << c.cell << " (rate " << c.dropout_rate << ", tau " << c.tau << ", epochs "
          << c.epochs << ") split " << c.split << ": " << c.error << '\n';
    }
  }
  return 1;
}

Dataset load_reported(const ExperimentConfig &cfg, std::ostream &out) {
  Dataset d = load_config_dataset(cfg);
  out << "data: " << cfg.data_path << "  " << fingerprint(d) << '\n';
  return d;
}

int cmd_toy(const ExperimentConfig &cfg, std::ostream &out, std::ostream &err) {
  const ToyStudyResult r = run_toy_study(cfg);
  for (const ToyCellResult &c : r.cells) {
    if (c.ok) out << c.curve_file.string() << '\n';
  }
  out << "training points: " << (cfg.output_dir / "toy_train.csv").string() << '\n';
  if (r.failures() == 0) return 0;
  err << r.failures() << " of " << r.cells.size() << " toy cells failed:\n";
  for (const ToyCellResult &c : r.cells) {
    if (!c.ok) err << "  " << c.error << '\n';
  }
  return 1;
}

int cmd_uci(const ExperimentConfig &cfg, std::ostream &out, std::ostream &err) {
  const Dataset data = load_reported(cfg, out);
  const ExperimentResult r = run_uci_study(cfg, data);
  print_aggregates(out, r, cfg.mode);
  out << "raw results: " << (cfg.output_dir / "raw.csv").string() << '\n';
  return report_failures(err, r);
}

int cmd_epochs(const ExperimentConfig &cfg, std::ostream &out, std::ostream &err) {
  const Dataset data = load_reported(cfg, out);
  const EpochsReport r = run_epochs_study(cfg, data);
  if (!cfg.dataset_name.empty()) out << cfg.dataset_name << '\n';
  out << format_epochs_report(r, cfg.mode);
  return report_failures(err, r.result);
}

int cmd_tsweep(const ExperimentConfig &cfg, std::ostream &out, std::ostream &err) {
  const Dataset data = load_reported(cfg, out);
  const TSweepResult r = run_T_study(cfg, data);
  out << "layers,width,T,rmse_mean,rmse_se\n" << std::setprecision(6);
  for (const TSweepCell &c : r.grid) {
    out << c.hidden_layers << ',' << c.width << ',' << c.T << ',' << c.rmse.mean << ','
        << c.rmse.se << '\n';
  }
  if (r.errors.empty()) return 0;
  err << r.errors.size() << " trainings failed:\n";
  for (const std::string &e : r.errors) err << "  " << e << '\n';
  return 1;
}

int cmd_train(const ExperimentConfig &cfg, const std::string &model_path,
              const std::string &loss_trace, std::ostream &out) {
  const Dataset raw = load_reported(cfg, out);
  auto [data, norm] = normalize(raw);
  const double p = retain_from_rate(cfg.dropout_rates.front());
  const double tau = cfg.taus.front();
  MlpShape shape;
  shape.input_width = data.features();
  shape.hidden_layers = cfg.hidden_layers;
  shape.width = cfg.width;
  shape.nonlinearity = cfg.nonlinearities.front();
  shape.retain_prob = p;
  shape.input_dropout = cfg.input_dropout;
  shape.heads = cfg.noise == NoiseModel::hetero ? OutputHeads::mean_and_logvar : OutputHeads::single;
  const HyperParams hyper = HyperParams::from_tau(p, tau, cfg.length_scale, data.size());
  TrainConfig tc;
  tc.epochs = cfg.epochs.back();
  tc.batch_size = std::min(cfg.batch_size, data.size());
  tc.learning_rate = cfg.learning_rate;
  tc.objective = cfg.noise == NoiseModel::hetero ? Objective::nll_heteroscedastic
                                                 : Objective::mse_homoscedastic;
  tc.seed = derive_seed(cfg.master_seed, {0, 0, 2});
  TrainResult tr = train(init_network(shape, derive_seed(cfg.master_seed, {0, 0, 1})), data, hyper, tc);

  const SavedModel model{std::move(tr.network), norm, tau};
  save_model(model_path, model);
  {
    std::ofstream m(manifest_path(model_path));
    if (!m) throw IoError("cannot write manifest for '" + model_path + "'");
    m << model_manifest(model, ModelProvenance{hyper, tc, cfg.data_path});
  }
  if (!loss_trace.empty()) {
    std::ofstream t(loss_trace);
    if (!t) throw IoError("cannot write '" + loss_trace + "'");
    t << "epoch,mean_loss\n" << std::setprecision(17);
    for (std::size_t e = 0; e < tr.epoch_loss.size(); ++e) t << e + 1 << ',' << tr.epoch_loss[e] << '\n';
  }
  out << "saved " << model_path << " (" << model.network.parameter_count()
      << " parameters, final loss " << tr.epoch_loss.back() << ")\n";
  return 0;
}

int cmd_predict(const std::string &model_path, const std::string &input, bool header,
                const std::string &delimiter, std::size_t T, std::uint64_t seed,
                const std::string &output, std::ostream &out) {
  const SavedModel model = load_model(model_path);
  const Tensor2 q = load_matrix(input, parse_delimiter(delimiter), header);
  Rng rng(derive_seed(seed, {0x9E, 0}));
  const PredictiveDistribution d =
      model.network.heads() == OutputHeads::single
          ? mc_predict(model.network, q, T, model.tau, rng, model.norm)
          : mc_predict_hetero(model.network, q, T, rng, model.norm);
  std::ofstream file;
  if (!output.empty()) {
    file.open(output);
    if (!file) throw IoError("cannot write '" + output + "'");
  }
  std::ostream &os = output.empty() ? out : file;
  os << "row,mean,epi_lo,epi_hi,tot_lo,tot_hi,epistemic_var,total_var\n" << std::setprecision(10);
  for (std::size_t i = 0; i < d.queries(); ++i) {
    const double es = std::sqrt(d.epistemic_var[i]);
    const double ts = std::sqrt(d.total_var[i]);
    os << i << ',' << d.mean[i] << ',' << d.mean[i] - 2 * es << ',' << d.mean[i] + 2 * es << ','
       << d.mean[i] - 2 * ts << ',' << d.mean[i] + 2 * ts << ',' << d.epistemic_var[i] << ','
       << d.total_var[i] << '\n';
  }
  return 0;
}

int cmd_inspect(const std::string &model_path, const ExperimentConfig &cfg, bool show_config,
                std::ostream &out) {
  if (!model_path.empty()) {
    const SavedModel model = load_model(model_path);
    out << model_manifest(model, {});
  }
  if (!cfg.data_path.empty()) {
    const Dataset d = load_config_dataset(cfg);
    out << fingerprint(d) << '\n';
  }
  if (show_config) {
    out << "T = " << cfg.T << "\nwidth = " << cfg.width << "\nhidden_layers = " << cfg.hidden_layers
        << "\nn_splits = " << cfg.n_splits << "\nmaster_seed = " << cfg.master_seed
        << "\nbatch_size = " << cfg.batch_size << "\nlearning_rate = " << cfg.learning_rate
        << "\nlength_scale = " << cfg.length_scale << '\n';
  }
  return 0;
}

} // namespace

int cli_main(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Monte Carlo dropout regression experiments", "mcdrop"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App *app;
    ConfigOptions opts;
  };
  std::map<std::string, Sub> subs;
  auto experiment = [&](const char *name, const char *help) -> Sub & {
    Sub &s = subs[name];
    s.app = app.add_subcommand(name, help);
    s.opts.attach(*s.app);
    return s;
  };
  experiment("toy", "Predictive curves on the 1-D cubic toy set");
  experiment("uci", "Dropout-rate by tau grid over random splits of a dataset");
  experiment("epochs", "Scores per independent epoch budget");
  experiment("tsweep", "RMSE against the number of stochastic passes");
  Sub &train_cmd = experiment("train", "Train one network on a whole dataset and save it");
  Sub &inspect_cmd = experiment("inspect", "Describe a saved model, dataset or resolved config");

  std::string model_path;
  std::string loss_trace;
  train_cmd.app->add_option("--model", model_path, "Where to write the model")->required();
  train_cmd.app->add_option("--loss-trace", loss_trace, "Write the per-epoch loss to this CSV");
  inspect_cmd.app->add_option("--model", model_path, "Saved model to describe");
  bool show_config = false;
  inspect_cmd.app->add_flag("--show-config", show_config, "Print the resolved configuration");

  CLI::App *predict = app.add_subcommand("predict", "MC predictive bands from a saved model");
  std::string pred_model, pred_in, pred_out, pred_delim = ",";
  std::size_t pred_T = 50;
  std::uint64_t pred_seed = 0;
  bool pred_header = false;
  predict->add_option("--model", pred_model, "Saved model")->required();
  predict->add_option("--in", pred_in, "Query rows (features only)")->required();
  predict->add_option("--T", pred_T, "Stochastic forward passes")->check(CLI::Range(2ul, 1ul << 30));
  predict->add_option("--seed", pred_seed, "Seed for the dropout masks");
  predict->add_option("--delimiter", pred_delim, "Query file delimiter");
  predict->add_flag("--header", pred_header, "Query file has a header row");
  predict->add_option("--output", pred_out, "Write to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    app.exit(e, out, err);
    err << app.help();
    return 2;
  }

  try {
    for (auto &[name, sub] : subs) {
      if (!sub.app->parsed()) continue;
      ExperimentConfig base = name == "toy" ? toy_defaults() : ExperimentConfig{};
      if (name == "epochs") base.epochs = {40, 400, 4000};
      ExperimentConfig cfg;
      try {
        cfg = sub.opts.resolve(base);
      } catch (const UsageError &e) {
        err << "mcdrop " << name << ": " << e.what() << '\n' << sub.app->help();
        return 2;
      }
      if (name != "toy" && name != "inspect" && cfg.data_path.empty()) {
        err << "mcdrop " << name << ": --data (or `data` in the config) is required\n";
        return 2;
      }
      if (name == "toy") return cmd_toy(cfg, out, err);
      if (name == "uci") return cmd_uci(cfg, out, err);
      if (name == "epochs") return cmd_epochs(cfg, out, err);
      if (name == "tsweep") return cmd_tsweep(cfg, out, err);
      if (name == "train") return cmd_train(cfg, model_path, loss_trace, out);
      return cmd_inspect(model_path, cfg, show_config, out);
    }
    return cmd_predict(pred_model, pred_in, pred_header, pred_delim, pred_T, pred_seed, pred_out,
                       out);
  } catch (const std::exception &e) {
    err << "mcdrop: " << e.what() << '\n';
    return 1;
  }
}

} // namespace mcdrop
