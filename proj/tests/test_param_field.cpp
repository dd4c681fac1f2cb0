#include "doctest.h"
#include "helpers.hpp"

#include "sobolev/io.hpp"
#include "sobolev/param_field.hpp"

#include <cmath>

using namespace sobo;
using sobo::testing::random_field;

namespace {

FieldParams random_params(const NetShape& shape, std::uint64_t seed, double scale = 0.3) {
  FieldParams p = FieldParams::init(shape, seed);
  Rng rng(derive_seed(seed, 99));
  for (double& v : p.mutable_values()) v = scale * rng.normal();
  return p;
}

struct Probe {
  Field2D xt, cond, upstream;
  double t;
};

Probe make_probe(const NetShape& s, std::uint64_t seed) {
  return {random_field(seed, s.rows, s.cols), random_field(seed + 1, s.rows, s.cols),
          random_field(seed + 2, s.rows, s.cols), 0.37};
}

double pairing(const FieldParams& p, const Probe& pr) {
  return dot(pr.upstream, forward(p, pr.xt, pr.cond, pr.t));
}

std::vector<double> analytic_param_grad(const FieldParams& p, const Probe& pr, Field2D* dx = nullptr) {
  ForwardCache cache;
  forward(p, pr.xt, pr.cond, pr.t, &cache);
  std::vector<double> g = p.zero_grad();
  Field2D d = backward(p, cache, pr.upstream, g);
  if (dx) *dx = std::move(d);
  return g;
}

} // namespace

TEST_CASE("parameter layout") {
  const NetShape s{4, 4, 8, true};
  const ParamLayout lay(s);
  CHECK(lay.w1 == 0);
  CHECK(lay.b1 == 8 * s.input_dim());
  CHECK(lay.end == s.param_count());
  CHECK(s.input_dim() == 2 * 16 + 4);
  const NetShape plain{4, 4, 8, false};
  CHECK(plain.param_count() + 2 * NetShape::kSkipBasis * 16 == s.param_count());
}

TEST_CASE("zero parameters give a zero field") {
  for (bool skip : {true, false}) {
    const NetShape s{5, 3, 6, skip};
    const FieldParams p = FieldParams::zeros(s);
    const Field2D out = forward(p, random_field(1, 5, 3), random_field(2, 5, 3), 0.4);
    for (double v : out.values()) CHECK(v == 0.0);
  }
}

TEST_CASE("fresh init outputs zero and has zero input gradient") {
  const NetShape s{4, 4, 8, true};
  const FieldParams p = FieldParams::init(s, 3);
  const Probe pr = make_probe(s, 10);
  ForwardCache cache;
  const Field2D out = forward(p, pr.xt, pr.cond, pr.t, &cache);
  for (double v : out.values()) CHECK(v == 0.0);
  std::vector<double> g = p.zero_grad();
  const Field2D dx = backward(p, cache, pr.upstream, g);
  for (double v : dx.values()) CHECK(v == 0.0);
}

TEST_CASE("forward is deterministic and shape preserving") {
  const NetShape s{6, 4, 8, true};
  const FieldParams p = random_params(s, 4);
  const Probe pr = make_probe(s, 20);
  const Field2D a = forward(p, pr.xt, pr.cond, pr.t);
  const Field2D b = forward(p, pr.xt, pr.cond, pr.t);
  CHECK(a == b);
  CHECK(a.rows() == 6);
  CHECK(a.cols() == 4);
  CHECK_THROWS_AS(forward(p, Field2D(4, 6), pr.cond, pr.t), ValidationError);
}

TEST_CASE("init is seeded") {
  const NetShape s{4, 4, 8, true};
  CHECK(FieldParams::init(s, 5) == FieldParams::init(s, 5));
  CHECK(!(FieldParams::init(s, 5) == FieldParams::init(s, 6)));
}

TEST_CASE("parameter gradient matches central differences") {
  for (bool skip : {true, false}) {
    const NetShape s{4, 4, 8, skip};
    const FieldParams p = random_params(s, 7);
    const Probe pr = make_probe(s, 30);
    const auto g = analytic_param_grad(p, pr);
    const auto rep = check_param_gradient([&](const FieldParams& q) { return pairing(q, pr); }, p, g,
                                          50, 1e-5, 11);
    CHECK(rep.probe_count == 50);
    CHECK(rep.epsilon == 1e-5);
    CHECK(rep.max_relative_error < 1e-4);
  }
}

TEST_CASE("every parameter block has exact gradients") {
  const NetShape s{4, 4, 6, true};
  const FieldParams p = random_params(s, 8);
  const Probe pr = make_probe(s, 40);
  const auto g = analytic_param_grad(p, pr);
  const ParamLayout lay(s);
  const std::size_t bounds[] = {lay.w1, lay.b1, lay.w2, lay.b2, lay.w3, lay.b3, lay.skip_x, lay.skip_c, lay.end};
  Rng rng(12);
  for (std::size_t b = 0; b + 1 < std::size(bounds); ++b) {
    for (int probe = 0; probe < 5; ++probe) {
      const std::size_t i = bounds[b] + rng.below(bounds[b + 1] - bounds[b]);
      FieldParams plus = p, minus = p;
      plus.mutable_values()[i] += 1e-5;
      minus.mutable_values()[i] -= 1e-5;
      const double fd = (pairing(plus, pr) - pairing(minus, pr)) / 2e-5;
      const double rel = std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-8});
      CHECK(rel < 1e-4);
    }
  }
}

TEST_CASE("input gradient matches central differences") {
  for (bool skip : {true, false}) {
    const NetShape s{4, 4, 8, skip};
    const FieldParams p = random_params(s, 9);
    const Probe pr = make_probe(s, 50);
    Field2D dx;
    analytic_param_grad(p, pr, &dx);
    const auto rep = check_field_gradient(
        [&](const Field2D& x) { return dot(pr.upstream, forward(p, x, pr.cond, pr.t)); }, pr.xt, dx,
        50, 1e-5, 13);
    CHECK(rep.max_relative_error < 1e-4);
  }
}

TEST_CASE("zero upstream gives zero gradients") {
  const NetShape s{4, 4, 8, true};
  const FieldParams p = random_params(s, 10);
  Probe pr = make_probe(s, 60);
  pr.upstream = Field2D(4, 4);
  Field2D dx;
  const auto g = analytic_param_grad(p, pr, &dx);
  for (double v : g) CHECK(v == 0.0);
  for (double v : dx.values()) CHECK(v == 0.0);
}

TEST_CASE("stale activation cache is detected") {
  const NetShape s{4, 4, 8, true};
  FieldParams p = random_params(s, 11);
  const Probe pr = make_probe(s, 70);
  ForwardCache cache;
  forward(p, pr.xt, pr.cond, pr.t, &cache);
  p.mutable_values()[0] += 1.0;
  std::vector<double> g = p.zero_grad();
  CHECK_THROWS_AS(backward(p, cache, pr.upstream, g), StaleCacheError);

  const FieldParams copy = p;
  forward(p, pr.xt, pr.cond, pr.t, &cache);
  CHECK_THROWS_AS(backward(copy, cache, pr.upstream, g), StaleCacheError);
  CHECK_THROWS_AS(backward(p, ForwardCache{}, pr.upstream, g), StaleCacheError);
}

TEST_CASE("sgd") {
  std::vector<double> w{1.0};
  const std::vector<double> g{2.0};
  sgd_update(w, g, 0.0);
  CHECK(w[0] == 1.0);
  sgd_update(w, g, 0.1);
  CHECK(w[0] == doctest::Approx(0.8).epsilon(1e-15));
  const std::vector<double> bad{std::nan("")};
  CHECK_THROWS_AS(sgd_update(w, bad, 0.1), ValidationError);
  CHECK_THROWS_AS(sgd_update(w, std::vector<double>{1.0, 2.0}, 0.1), ValidationError);
}

TEST_CASE("adam first step moves by about lr") {
  for (double g0 : {3.0, -0.02, 1e-3}) {
    std::vector<double> w{0.5};
    AdamState st;
    AdamConfig cfg;
    cfg.lr = 0.01;
    adam_update(w, std::vector<double>{g0}, st, cfg);
    // m_hat = g, v_hat = g^2, so the step is lr * |g| / (|g| + eps).
    const double expected = cfg.lr * std::abs(g0) / (std::abs(g0) + cfg.eps);
    CHECK(std::abs(0.5 - w[0]) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(0.5 - w[0]) == doctest::Approx(0.01).epsilon(1e-4));
    CHECK(st.step == 1);
  }
}

TEST_CASE("adam with lr 0 leaves parameters unchanged") {
  std::vector<double> w{0.5, -1.0};
  AdamState st;
  AdamConfig cfg;
  cfg.lr = 0.0;
  adam_update(w, std::vector<double>{1.0, 2.0}, st, cfg);
  CHECK(w == std::vector<double>{0.5, -1.0});
  CHECK_THROWS_AS(adam_update(w, std::vector<double>{INFINITY, 0.0}, st, cfg), ValidationError);
}

TEST_CASE("adam decoupled weight decay") {
  std::vector<double> w{2.0};
  AdamState st;
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  adam_update(w, std::vector<double>{0.0}, st, cfg);
  CHECK(w[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0).epsilon(1e-14));
}

TEST_CASE("parameter files round trip") {
  const NetShape s{4, 3, 5, true};
  const FieldParams p = random_params(s, 12);
  const std::string bytes = encode_params(p);
  CHECK(bytes.substr(0, 8) == "SOBPRM01");
  CHECK(bytes.size() == 16 + 5 * 8 + 8 * p.param_count());
  CHECK(decode_params(bytes) == p);
  CHECK(encode_params(decode_params(bytes)) == bytes);
  CHECK_THROWS_AS(decode_params(bytes.substr(0, bytes.size() - 3)), ValidationError);
  std::string bad = bytes;
  bad[3] = 'X';
  CHECK_THROWS_AS(decode_params(bad), ValidationError);
  CHECK_THROWS_AS(read_params("/nonexistent/dir/p.prm"), IoError);
}

TEST_CASE("time embedding") {
  const auto e = time_embedding(0.25);
  CHECK(e[0] == doctest::Approx(std::sin(M_PI * 0.25)));
  CHECK(e[1] == doctest::Approx(std::cos(M_PI * 0.25)));
  CHECK(e[2] == doctest::Approx(std::sin(2 * M_PI * 0.25)));
  CHECK(e[3] == doctest::Approx(std::cos(2 * M_PI * 0.25)));
}
