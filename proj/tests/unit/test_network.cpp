#include <doctest.h>

#include <cmath>
#include <vector>

#include "mcdrop/network.hpp"

using namespace mcdrop;

namespace {

Network one_layer(double p, Nonlinearity nl = Nonlinearity::identity) {
  return init_network({{3, 2, nl, p}}, 42);
}

} // namespace

TEST_SUITE("network") {

TEST_CASE("init shapes and bounds") {
  const Network net = init_network({{1, 100, Nonlinearity::relu, 1.0}, {100, 1, Nonlinearity::identity, 0.9}}, 1);
  CHECK(net.weight(0).rows() == 1);
  CHECK(net.weight(0).cols() == 100);
  CHECK(net.weight(1).rows() == 100);
  CHECK(net.weight(1).cols() == 1);
  CHECK(net.bias(0).cols() == 100);
  CHECK(net.bias(1).cols() == 1);
  for (double w : net.weight(0).data()) CHECK(std::abs(w) <= 1.0);
  for (double w : net.weight(1).data()) CHECK(std::abs(w) <= 0.1);
  for (double b : net.bias(0).data()) CHECK(b == 0.0);
  CHECK(net == init_network(net.layers(), 1));
  CHECK(net.fingerprint() == init_network(net.layers(), 1).fingerprint());
  CHECK(net.fingerprint() != init_network(net.layers(), 2).fingerprint());
  CHECK(net.parameter_count() == 100 + 100 + 100 + 1);
}

TEST_CASE("construction rejects invalid layers") {
  CHECK_THROWS_AS(init_network({{1, 4, Nonlinearity::relu, 1.0}, {5, 1, Nonlinearity::identity, 1.0}}, 0),
                  ShapeError);
  CHECK_THROWS_AS(init_network({{1, 4, Nonlinearity::relu, 0.0}}, 0), std::invalid_argument);
  CHECK_THROWS_AS(init_network({{1, 4, Nonlinearity::relu, 1.5}}, 0), std::invalid_argument);
  CHECK_THROWS_AS(init_network({{1, 3, Nonlinearity::identity, 1.0}}, 0, OutputHeads::mean_and_logvar),
                  ShapeError);
  CHECK_THROWS_AS(parse_nonlinearity("sigmoid"), std::invalid_argument);
}

TEST_CASE("mlp specs: one mask site per weight layer, raw input kept unless asked") {
  MlpShape shape;
  shape.input_width = 4;
  shape.hidden_layers = 1;
  shape.width = 10;
  shape.retain_prob = 0.8;
  const auto specs = make_mlp_specs(shape);
  REQUIRE(specs.size() == 2);
  CHECK(all_ones_masks(init_network(specs, 0)).sites() == 2);
  CHECK(specs[0].retain_prob == 1.0);
  CHECK(specs[1].retain_prob == 0.8);
  CHECK(specs[1].nonlinearity == Nonlinearity::identity);
  shape.input_dropout = true;
  CHECK(make_mlp_specs(shape)[0].retain_prob == 0.8);
  shape.heads = OutputHeads::mean_and_logvar;
  CHECK(make_mlp_specs(shape).back().out_width == 2);
}

TEST_CASE("mask retain frequency within three binomial standard errors") {
  const Network net = init_network({{100, 1, Nonlinearity::identity, 0.9}}, 0);
  Rng rng(8);
  const std::size_t draws = 10000;
  double kept = 0.0;
  for (std::size_t i = 0; i < draws / 100; ++i) {
    const MaskSet m = sample_masks(net, rng);
    for (double z : m.masks[0].data()) {
      CHECK((z == 0.0 || z == 1.0));
      kept += z;
    }
  }
  const double freq = kept / draws;
  CHECK(std::abs(freq - 0.9) <= 3.0 * std::sqrt(0.9 * 0.1 / draws));
}

TEST_CASE("p = 1 masks are all ones and independent rng states differ") {
  const Network keep = one_layer(1.0);
  Rng rng(1);
  CHECK(sample_masks(keep, rng).masks[0] == Tensor2(1, 3, 1.0));

  const Network wide = init_network({{100, 1, Nonlinearity::identity, 0.5}}, 0);
  CHECK(sample_masks_from_seed(wide, 1).masks[0] != sample_masks_from_seed(wide, 2).masks[0]);
  CHECK(sample_masks_from_seed(wide, 1).masks[0] == sample_masks_from_seed(wide, 1).masks[0]);
}

TEST_CASE("forward modes agree when nothing is dropped") {
  const Network net = init_network({{3, 5, Nonlinearity::tanh, 1.0}, {5, 1, Nonlinearity::identity, 1.0}}, 3);
  const Tensor2 x = Tensor2::from_rows({{0.1, -0.2, 0.3}, {1.0, 2.0, -3.0}});
  CHECK(forward_masked(net, x, all_ones_masks(net)) == forward_raw(net, x));
  CHECK(forward_scaled(net, x) == forward_raw(net, x));
  CHECK(forward_scaled(net, x) == forward_scaled(net, x));
}

TEST_CASE("zero parameters give zero output") {
  Network net = init_network({{2, 3, Nonlinearity::relu, 1.0}, {3, 1, Nonlinearity::identity, 1.0}}, 0);
  for (std::size_t l = 0; l < 2; ++l) {
    for (double &w : net.mutable_weight(l).mutable_data()) w = 0.0;
  }
  CHECK(forward_raw(net, Tensor2::from_rows({{4, 5}}))(0, 0) == 0.0);
}

TEST_CASE("hand computed 1-2-1 tanh network") {
  const Network net({{1, 2, Nonlinearity::tanh, 1.0}, {2, 1, Nonlinearity::identity, 1.0}},
                    {Tensor2::from_rows({{0.5, -1.0}}), Tensor2::from_rows({{2.0}, {3.0}})},
                    {Tensor2::from_rows({{0.1, 0.2}}), Tensor2::from_rows({{-0.5}})});
  const double x = 0.7;
  const double expected = 2.0 * std::tanh(0.5 * x + 0.1) + 3.0 * std::tanh(-1.0 * x + 0.2) - 0.5;
  CHECK(forward_raw(net, Tensor2::from_rows({{x}}))(0, 0) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("inverted scaling: masked passes average to the scaled pass for an affine layer") {
  const Network net = one_layer(0.7);
  const Tensor2 x = Tensor2::from_rows({{1.0, -2.0, 0.5}});
  const Tensor2 scaled = forward_scaled(net, x);
  Rng rng(21);
  const std::size_t M = 100000;
  std::vector<double> sum(2, 0.0), sum2(2, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    const Tensor2 out = forward_masked(net, x, sample_masks(net, rng));
    for (std::size_t j = 0; j < 2; ++j) {
      sum[j] += out(0, j);
      sum2[j] += out(0, j) * out(0, j);
    }
  }
  for (std::size_t j = 0; j < 2; ++j) {
    const double mean = sum[j] / M;
    const double se = std::sqrt((sum2[j] / M - mean * mean) / M);
    CHECK(std::abs(mean - scaled(0, j)) <= 4.0 * se);
  }
}

TEST_CASE("zeroed unit makes output independent of its weight row") {
  Network net = one_layer(0.5);
  MaskSet m = all_ones_masks(net);
  m.masks[0].at(0, 1) = 0.0;
  const Tensor2 x = Tensor2::from_rows({{1.0, 2.0, 3.0}});
  const Tensor2 before = forward_masked(net, x, m);
  net.mutable_weight(0).at(1, 0) += 10.0;
  net.mutable_weight(0).at(1, 1) -= 3.0;
  CHECK(forward_masked(net, x, m) == before);
}

TEST_CASE("shape errors") {
  const Network net = one_layer(0.5);
  CHECK_THROWS_AS(forward_raw(net, Tensor2(1, 2)), ShapeError);
  MaskSet m = all_ones_masks(net);
  m.masks[0] = Tensor2(1, 4, 1.0);
  CHECK_THROWS_AS(forward_masked(net, Tensor2(1, 3), m), ShapeError);
  CHECK_THROWS_AS(split_heads(net, Tensor2(1, 2)), ContractError);
}

TEST_CASE("split heads halves the output") {
  const Network net = init_network({{1, 2, Nonlinearity::identity, 1.0}}, 0, OutputHeads::mean_and_logvar);
  const auto [mean, logvar] = split_heads(net, Tensor2::from_rows({{1, 2}, {3, 4}}));
  CHECK(mean == Tensor2::from_rows({{1}, {3}}));
  CHECK(logvar == Tensor2::from_rows({{2}, {4}}));
}

}
