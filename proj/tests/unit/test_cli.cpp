#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mcdrop/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "mcdrop");
  std::vector<const char *> argv;
  for (const std::string &a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = mcdrop::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  const fs::path d = fs::temp_directory_path() / "mcdrop_unit_cli";
  fs::create_directories(d);
  return d;
}

fs::path linear_table() {
  const fs::path p = scratch() / "linear.csv";
  std::ofstream os(p);
  os << "x1,x2,y\n";
  for (int i = 0; i < 40; ++i) os << i * 0.1 << ',' << (i % 7) << ',' << 2.0 * i * 0.1 - (i % 7) << '\n';
  return p;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"toy", "--no-such-flag"}).code == 2);
  CHECK(run({"uci"}).code == 2);
  CHECK(run({"toy", "--rate", "1.5"}).code == 2);
  CHECK(run({"toy", "--set", "bogus=1"}).code == 2);
  CHECK(run({"predict", "--in", "x.csv"}).code == 2);
}

TEST_CASE("runtime errors exit with 1") {
  const Run r = run({"predict", "--model", "/nonexistent/m.bin", "--in", "/nonexistent/q.csv"});
  CHECK(r.code == 1);
  CHECK(r.err.find("mcdrop:") != std::string::npos);
}

TEST_CASE("toy command writes curve files") {
  const fs::path out = scratch() / "toy";
  fs::remove_all(out);
  const Run r = run({"toy", "--nonlin", "relu", "--rate", "0.1", "--tau", "0.25", "--epochs", "4",
                     "--grid-points", "9", "--out", out.string()});
  CHECK(r.code == 0);
  CHECK(fs::exists(out / "toy_train.csv"));
  std::size_t curves = 0;
  for (const auto &e : fs::directory_iterator(out)) curves += e.path().filename().string().starts_with("curve_");
  CHECK(curves == 1);
}

TEST_CASE("train then predict") {
  const fs::path data = linear_table();
  const fs::path model = scratch() / "linear.bin";
  const fs::path trace = scratch() / "loss.csv";
  const Run t = run({"train", "--data", data.string(), "--header", "--epochs", "20", "--width", "10",
                     "--model", model.string(), "--loss-trace", trace.string()});
  REQUIRE(t.code == 0);
  CHECK(t.out.find("rows=40") != std::string::npos);
  CHECK(fs::exists(model));
  CHECK(fs::exists(model.string() + ".manifest.json"));

  std::ifstream lt(trace);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(lt, line)) ++lines;
  CHECK(lines == 21);

  const fs::path queries = scratch() / "q.csv";
  std::ofstream(queries) << "0.5,1\n2.0,3\n";
  const Run p = run({"predict", "--model", model.string(), "--in", queries.string(), "--T", "30"});
  REQUIRE(p.code == 0);
  std::istringstream is(p.out);
  std::getline(is, line);
  CHECK(line == "row,mean,epi_lo,epi_hi,tot_lo,tot_hi,epistemic_var,total_var");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 2);
  CHECK(run({"predict", "--model", model.string(), "--in", queries.string(), "--T", "30"}).out == p.out);

  const Run i = run({"inspect", "--model", model.string()});
  CHECK(i.code == 0);
  CHECK(i.out.find("\"layers\"") != std::string::npos);
}

TEST_CASE("inspect reports a dataset and the resolved config") {
  const Run r = run({"inspect", "--data", linear_table().string(), "--header", "--set", "width=17",
                     "--show-config"});
  CHECK(r.code == 0);
  CHECK(r.out.find("rows=40 columns=3") != std::string::npos);
  CHECK(r.out.find("width = 17") != std::string::npos);
}

}
