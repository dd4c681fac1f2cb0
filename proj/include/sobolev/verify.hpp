#pragma once

#include "sobolev/adversary.hpp"

#include <string>
#include <vector>

namespace sobo {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::string suite;
  std::string headline; // e.g. "prop1: cosine=0.9998"
  std::vector<CheckResult> checks;

  bool passed() const;
  void add(std::string name, bool ok, std::string detail);
  /// Headline, one "  [ok|FAIL] name: detail" line per check, then the verdict.
  std::string to_text() const;
};

struct Prop1Options {
  double s = 1.5;
  double eps = 0.1;
  std::uint64_t seed = 42;
  int energies = 20;
  std::size_t grid = 8;
  double curvature = 1.0; // scale of the random SPD part of each Hessian
  PgdConfig pgd{400, 0.1};
};

/// optimal_delta against projected gradient descent on random quadratic
/// energies, budget attainment, the s = 0 reduction and the first-order
/// descent check.
VerifyReport verify_prop1(const Prop1Options& opt = {});

struct Prop2Options {
  double s = 1.5;
  double eps = 0.1;
  std::uint64_t seed = 42;
  std::size_t grid = 8;
  int steps = 2000;
  double lr = 1e-3;
  std::size_t hidden = 32;             // single consistency run
  std::vector<std::size_t> widths{2, 8, 32, 128};
  std::size_t sweep_states = 4;        // states sharing one quadratic energy
  double threshold = 0.99;
  std::size_t saturation_width = 8;
};

/// Trained MLP adversary vs the closed form at a fixed state, then a capacity
/// sweep over hidden widths on a small set of states.
VerifyReport verify_prop2(const Prop2Options& opt = {});

struct SpectralOptions {
  std::uint64_t seed = 42;
  int fields_per_shape = 100;
  std::size_t coloring_samples = 100000;
  std::size_t coloring_grid = 16;
  std::vector<double> coloring_orders{0.5, 1.5, 3.0};
  double coloring_tolerance = 0.05;
  std::size_t white_samples = 10000;
  std::size_t white_grid = 32;
};

/// Parseval, Sigma_s Sigma_s^-1 = I and the two H^s norm routes.
VerifyReport verify_spectral_identities(const SpectralOptions& opt = {});
/// Per-bin variance of coloured noise against D_s and white-noise PSD flatness.
VerifyReport verify_coloring(const SpectralOptions& opt = {});

} // namespace sobo
