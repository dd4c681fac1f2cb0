#include "doctest.h"
#include "helpers.hpp"

#include "sobolev/noise.hpp"

#include <algorithm>
#include <cmath>

using namespace sobo;

TEST_CASE("splitmix64 reference stream") {
  // Published test vector for seed 1234567.
  std::uint64_t st = 1234567;
  CHECK(splitmix64(st) == 6457827717110365317ull);
  CHECK(splitmix64(st) == 3203168211198807973ull);
  CHECK(splitmix64(st) == 9817491932198370423ull);
}

TEST_CASE("xoshiro256** stream, uniforms and Box-Muller pair") {
  // Values from an independent re-implementation of the documented recipe.
  Rng a(42);
  CHECK(a.next() == 1546998764402558742ull);
  CHECK(a.next() == 6990951692964543102ull);
  CHECK(a.draws() == 2);

  Rng b(42);
  CHECK(b.uniform() == 0.08386297105988216);
  CHECK(b.uniform() == 0.3789802506626686);

  Rng c(42);
  CHECK(c.normal() == doctest::Approx(-0.30326306467873798).epsilon(1e-15));
  CHECK(c.normal() == doctest::Approx(0.28846173882942383).epsilon(1e-15));
  CHECK(c.draws() == 2); // both Box-Muller outputs come from one pair
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(42, 0) != derive_seed(42, 1));
  CHECK(derive_seed(42, 1) != derive_seed(43, 1));
  CHECK(derive_seed(42, 7) == derive_seed(42, 7));
}

TEST_CASE("Rng::below stays in range") {
  Rng r(9);
  for (int i = 0; i < 1000; ++i) CHECK(r.below(7) < 7);
}

TEST_CASE("sample_white moments over 1e5 draws") {
  NoiseSampler s(123, 2, 2);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = s.sample_white()(1, 0);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("same seed gives identical streams") {
  NoiseSampler a(5, 8, 8), b(5, 8, 8);
  for (int i = 0; i < 3; ++i) CHECK(a.sample_white() == b.sample_white());
  auto op = std::make_shared<const SobolevOperator>(1.5, 8, 8);
  NoiseSampler c(5, op), d(5, op);
  CHECK(c.sample_colored() == d.sample_colored());
}

TEST_CASE("sample_colored is Sigma^(1/2) of the white draw") {
  auto op = std::make_shared<const SobolevOperator>(1.5, 8, 8);
  NoiseSampler col(77, op), white(77, 8, 8);
  for (int i = 0; i < 3; ++i) CHECK(col.sample_colored() == apply_sigma_sqrt(*op, white.sample_white()));
}

TEST_CASE("sample_colored at s = 0 equals sample_white") {
  auto op = std::make_shared<const SobolevOperator>(0.0, 6, 6);
  NoiseSampler col(8, op), white(8, 6, 6);
  CHECK(col.sample_colored() == white.sample_white());
}

TEST_CASE("sample_colored without operator is rejected") {
  NoiseSampler s(1, 4, 4);
  CHECK_THROWS_AS(s.sample_colored(), ValidationError);
}

TEST_CASE("coloured spectral variance follows D_s") {
  auto op = std::make_shared<const SobolevOperator>(1.5, 8, 8);
  NoiseSampler s(2024, op);
  const int n = 100000;
  double v10 = 0.0, v00 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Spectrum2D sp = op->plan().forward(s.sample_colored());
    v10 += sp(1, 0) * sp(1, 0);
    v00 += sp(0, 0) * sp(0, 0);
  }
  CHECK(std::abs(v10 / n / std::pow(2.0, -1.5) - 1.0) < 0.05);
  CHECK(std::abs(v00 / n - 1.0) < 0.05);
}

TEST_CASE("white noise PSD is radially flat at 32x32") {
  NoiseSampler s(31, 32, 32);
  PsdAccumulator acc(32, 32);
  for (int i = 0; i < 10000; ++i) acc.add(s.sample_white());
  const PsdEstimate psd = acc.finish();
  CHECK(psd.sample_count == 10000);
  double lo = 1e300, hi = 0.0;
  for (const auto& b : psd.radial_bins) {
    lo = std::min(lo, b.power);
    hi = std::max(hi, b.power);
  }
  CHECK(hi / lo < 1.5);
}

TEST_CASE("coloured ensemble PSD slope is -s") {
  auto op = std::make_shared<const SobolevOperator>(1.5, 16, 16);
  NoiseSampler s(32, op);
  std::vector<Field2D> fields;
  for (int i = 0; i < 2000; ++i) fields.push_back(s.sample_colored());
  CHECK(std::abs(psd_slope(estimate_psd(fields)) + 1.5) < 0.1);
}

TEST_CASE("PSD of a single zero field") {
  const std::vector<Field2D> one{Field2D(8, 8)};
  const PsdEstimate psd = estimate_psd(one);
  for (const auto& b : psd.radial_bins) CHECK(b.power == 0.0);
  CHECK_THROWS_AS(psd_slope(psd), ValidationError);
}

TEST_CASE("PSD bins are ordered and cover every coefficient") {
  const std::vector<Field2D> f{sobo::testing::random_field(3, 9, 5)};
  const PsdEstimate psd = estimate_psd(f);
  std::size_t members = 0;
  for (std::size_t i = 0; i < psd.radial_bins.size(); ++i) {
    members += psd.radial_bins[i].members;
    CHECK(psd.radial_bins[i].power >= 0.0);
    if (i > 0) CHECK(psd.radial_bins[i].radius > psd.radial_bins[i - 1].radius);
  }
  CHECK(members == 45);
  CHECK(psd.radial_bins.front().radius == 0.0);
  CHECK(psd.radial_bins.front().members == 1);
}

TEST_CASE("estimate_psd input errors") {
  CHECK_THROWS_AS(estimate_psd(std::vector<Field2D>{}), ValidationError);
  const std::vector<Field2D> mixed{Field2D(4, 4), Field2D(4, 5)};
  CHECK_THROWS_AS(estimate_psd(mixed), ValidationError);
}

TEST_CASE("psd_to_csv layout") {
  PsdEstimate psd;
  psd.radial_bins = {{0.0, 2.0, 1}, {1.0, 0.5, 2}};
  psd.sample_count = 1;
  CHECK(psd_to_csv(psd) == "radius,power\n0,2\n1,0.5\n");
}
