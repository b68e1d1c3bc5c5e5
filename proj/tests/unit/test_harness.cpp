#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mcdrop/harness.hpp"

using namespace mcdrop;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(const fs::path &out) {
  ExperimentConfig c;
  c.width = 8;
  c.dropout_rates = {0.1, 0.3};
  c.taus = {0.5};
  c.epochs = {3, 6};
  c.n_splits = 3;
  c.T = 10;
  c.t_values = {2, 5};
  c.master_seed = 11;
  c.workers = 2;
  c.output_dir = out;
  return c;
}

Dataset small_dataset() {
  Dataset d = make_toy_cubic(60, -2.0, 2.0, 0.5, 3);
  return d;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("summary statistics") {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  const Summary s = summarize(v);
  CHECK(s.mean == 2.5);
  CHECK(s.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(s.n == 4);
  CHECK(summarize(std::vector<double>{7.0}).se == 0.0);

  const FiveNumber f = five_number({5.0, 1.0, 3.0, 2.0, 4.0});
  CHECK(f.min == 1.0);
  CHECK(f.q1 == 2.0);
  CHECK(f.median == 3.0);
  CHECK(f.q3 == 4.0);
  CHECK(f.max == 5.0);
  CHECK(five_number({1.0, 2.0}).median == 1.5);
}

TEST_CASE("parallel runner visits every index once") {
  for (std::size_t workers : {1, 3, 8}) {
    std::vector<std::atomic<int>> hits(37);
    run_parallel(hits.size(), workers, [&](std::size_t i) { hits[i]++; });
    for (auto &h : hits) CHECK(h.load() == 1);
  }
  CHECK(resolve_workers(4) == 4);
  CHECK(resolve_workers(0) >= 1);
}

TEST_CASE("raw rows survive a write and read") {
  std::vector<CellResult> raw(3);
  raw[0] = {0, 0, 0.1, 0.5, 40, 1, 50, 455, 51, 3.0 + 1e-15, -2.5, 3.1, -2.6, 0xabcdef0123456789ull, true, "", 0};
  raw[1] = {0, 1, 0.1, 0.5, 40, 1, 50, 455, 51, 2.0, -2.0, 2.1, -2.1, 7, true, "", 0};
  raw[2] = {1, 0, 0.5, 0.5, 40, 1, 50, 455, 51, 0, 0, 0, 0, 0, false, "diverged, at\nepoch 3", 0};
  std::stringstream ss;
  write_raw(ss, raw);
  const auto back = read_raw(ss);
  REQUIRE(back.size() == 3);
  CHECK(back[0].rmse_mc == raw[0].rmse_mc);
  CHECK(back[0].fingerprint == raw[0].fingerprint);
  CHECK(back[1].split == 1);
  CHECK_FALSE(back[2].ok);
  CHECK(back[2].error.find('\n') == std::string::npos);
  CHECK(back[2].error.find(',') == std::string::npos);

  const auto agg = aggregate(back);
  REQUIRE(agg.size() == 2);
  CHECK(agg[0].rmse_mc.mean == doctest::Approx(2.5));
  CHECK(agg[0].rmse_mc.n == 2);
  CHECK(agg[1].failures == 1);
  CHECK(agg[1].rmse_mc.n == 0);
}

TEST_CASE("uci study is reproducible and its aggregates follow from the raw rows") {
  const fs::path out = fs::temp_directory_path() / "mcdrop_unit_uci";
  fs::remove_all(out);
  ExperimentConfig c = small_config(out);
  const Dataset d = small_dataset();
  const ExperimentResult r = run_uci_study(c, d);
  CHECK(r.failures() == 0);
  CHECK(r.raw.size() == 2 * 2 * 3);
  for (const CellResult &row : r.raw) {
    CHECK(row.n_test == 6);
    CHECK(row.n_train == 54);
    CHECK(std::isfinite(row.rmse_mc));
    CHECK(std::isfinite(row.ll_std));
  }
  for (const char *f : {"raw.csv", "aggregate.csv", "box.csv", "timings.csv"}) CHECK(fs::exists(out / f));

  std::ifstream in(out / "raw.csv");
  const auto reread = read_raw(in);
  const auto again = aggregate(reread);
  REQUIRE(again.size() == r.aggregates.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].rmse_mc.mean == r.aggregates[i].rmse_mc.mean);
    CHECK(again[i].ll_std.se == r.aggregates[i].ll_std.se);
  }

  const std::string first = slurp(out / "raw.csv");
  c.workers = 1;
  run_uci_study(c, d);
  CHECK(slurp(out / "raw.csv") == first);
}

TEST_CASE("checkpointed scores at the first epoch match a fresh run") {
  const fs::path out = fs::temp_directory_path() / "mcdrop_unit_ckpt";
  ExperimentConfig c = small_config(out);
  c.dropout_rates = {0.1};
  c.n_splits = 2;
  const Dataset d = small_dataset();
  const ExperimentResult fresh = run_uci_study(c, d, false);
  c.checkpoint = true;
  const ExperimentResult ckpt = run_uci_study(c, d, false);
  REQUIRE(fresh.raw.size() == ckpt.raw.size());
  for (std::size_t i = 0; i < fresh.raw.size(); ++i) {
    CHECK(ckpt.raw[i].ok);
    if (fresh.raw[i].epochs != c.epochs.front()) continue;
    CHECK(ckpt.raw[i].fingerprint == fresh.raw[i].fingerprint);
    CHECK(ckpt.raw[i].rmse_std == fresh.raw[i].rmse_std);
  }
}

TEST_CASE("epochs report") {
  const fs::path out = fs::temp_directory_path() / "mcdrop_unit_epochs";
  const ExperimentConfig c = small_config(out);
  const EpochsReport a = run_epochs_study(c, small_dataset());
  CHECK(a.rows.size() == 2);
  CHECK(a.rows[0].epochs == 3);
  const std::string text = format_epochs_report(a, PredictorMode::both);
  CHECK(text.find("MC dropout") != std::string::npos);
  CHECK(text.find("Standard dropout") != std::string::npos);
  CHECK(text.find("6 Epochs") != std::string::npos);
  CHECK(format_epochs_report(a, PredictorMode::mc).find("Standard") == std::string::npos);
  CHECK(slurp(out / "epochs_report.txt") == format_epochs_report(run_epochs_study(c, small_dataset(), false), c.mode));
}

TEST_CASE("T sweep") {
  const fs::path out = fs::temp_directory_path() / "mcdrop_unit_tsweep";
  ExperimentConfig c = small_config(out);
  c.layers_list = {1, 2};
  c.widths = {4};
  const TSweepResult r = run_T_study(c, small_dataset());
  CHECK(r.errors.empty());
  CHECK(r.rows.size() == 2 * 3 * 2);
  CHECK(r.grid.size() == 2 * 2);
  CHECK(fs::exists(out / "tsweep_raw.csv"));
  c.noise = NoiseModel::hetero;
  CHECK_THROWS_AS(run_T_study(c, small_dataset(), false), ContractError);
}

TEST_CASE("toy study") {
  ExperimentConfig c = toy_defaults();
  c.nonlinearities = {Nonlinearity::tanh};
  c.dropout_rates = {0.1};
  c.taus = {0.25, 1.0};
  c.epochs = {5};
  c.grid_points = 11;
  c.output_dir = fs::temp_directory_path() / "mcdrop_unit_toy";
  fs::remove_all(c.output_dir);
  const ToyStudyResult r = run_toy_study(c);
  CHECK(r.failures() == 0);
  CHECK(r.data.size() == c.toy_n);
  CHECK(r.grid.size() == 11);
  CHECK(r.grid.front() == c.toy_lo);
  REQUIRE(r.cells.size() == 2);
  for (const ToyCellResult &cell : r.cells) {
    CHECK(cell.curve.size() == 11);
    CHECK(cell.epoch_loss.size() == 5);
    CHECK(fs::exists(cell.curve_file));
  }
  CHECK(fs::exists(c.output_dir / "toy_train.csv"));
  const ToyCellResult again = run_toy_cell(c, r.data, r.grid, r.cells[1].cell, 1);
  CHECK(again.curve[3].mc_mean == r.cells[1].curve[3].mc_mean);
}

}
