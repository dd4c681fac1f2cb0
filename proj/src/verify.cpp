#include "sobolev/verify.hpp"

#include "sobolev/io.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace sobo {

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

void VerifyReport::add(std::string name, bool ok, std::string detail) {
  checks.push_back({std::move(name), ok, std::move(detail)});
}

std::string VerifyReport::to_text() const {
  std::string out = headline + "\n";
  for (const auto& c : checks)
    out += std::string("  [") + (c.passed ? "ok" : "FAIL") + "] " + c.name + ": " + c.detail + "\n";
  out += suite + ": " + (passed() ? "PASS" : "FAIL") + "\n";
  return out;
}

namespace {

std::string fmt(double v) { return format_double(v); }

double max_abs(const Field2D& a, const Field2D& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

} // namespace

VerifyReport verify_prop1(const Prop1Options& opt) {
  if (opt.energies < 1) throw ValidationError("prop1: need at least one energy");
  VerifyReport rep;
  rep.suite = "prop1";
  const SobolevOperator op(opt.s, opt.grid, opt.grid);
  const SobolevOperator flat(0.0, opt.grid, opt.grid);
  Rng rng(opt.seed);

  double min_cos = 1.0, max_norm_err = 0.0, max_s0_err = 0.0, worst_margin = -1e300;
  bool all_descend = true;
  for (int k = 0; k < opt.energies; ++k) {
    const Field2D center = white_field(rng, opt.grid, opt.grid);
    const Field2D x = white_field(rng, opt.grid, opt.grid);
    const QuadraticEnergy j = QuadraticEnergy::random_spd(center, opt.curvature, rng);
    const EnergyFn fn = [&j](const Field2D& v) { return j(v); };
    const Field2D g = j(x).grad;

    const auto star = optimal_delta(op, g, opt.eps);
    if (!star) throw DivergenceError("prop1: degenerate gradient at a random state", k);
    const Field2D pgd = projected_gradient_minimize(fn, x, op, opt.eps, opt.pgd);
    min_cos = std::min(min_cos, hs_cosine(op, *star, pgd));
    max_norm_err = std::max(max_norm_err, std::abs(std::sqrt(sobolev_norm_sq(op, *star)) - opt.eps));

    const Field2D s0 = *optimal_delta(flat, g, opt.eps);
    max_s0_err = std::max(max_s0_err, max_abs(s0, (-opt.eps / std::sqrt(squared_norm(g))) * g));

    const DescentCheck dc = first_order_descent_check(fn, x, op, 1e-3, 100, derive_seed(opt.seed, k));
    all_descend = all_descend && dc.decrease <= 0.0;
    worst_margin = std::max(worst_margin, dc.decrease - dc.best_random_decrease);
  }

  rep.headline = "prop1: cosine=" + fmt(min_cos);
  rep.add("pgd_oracle_cosine", min_cos > 0.999,
          "min H^s cosine " + fmt(min_cos) + " over " + std::to_string(opt.energies) + " energies (> 0.999)");
  rep.add("budget", max_norm_err <= 1e-9 * std::max(1.0, opt.eps),
          "max | |delta*|_Hs - eps | = " + fmt(max_norm_err));
  rep.add("s0_reduction", max_s0_err <= 1e-9,
          "max deviation from -eps g/|g| = " + fmt(max_s0_err));
  rep.add("descent", all_descend && worst_margin <= 1e-6,
          "J(x + delta*) - J(x) <= 0 everywhere; worst margin over random directions " + fmt(worst_margin));
  return rep;
}

VerifyReport verify_prop2(const Prop2Options& opt) {
  if (opt.widths.empty()) throw ValidationError("prop2: no widths");
  VerifyReport rep;
  rep.suite = "prop2";
  const SobolevOperator op(opt.s, opt.grid, opt.grid);
  const TrustRegion trust{opt.eps};
  Rng rng(opt.seed);
  const Field2D center = white_field(rng, opt.grid, opt.grid);
  const QuadraticEnergy energy(center);
  auto task_at = [&](Field2D x) {
    return AdversaryTask{std::move(x), Field2D(opt.grid, opt.grid), 0.5,
                         [energy](const Field2D& v) { return energy(v); }};
  };

  AdversaryTrainConfig cfg;
  cfg.steps = opt.steps;
  cfg.adam.lr = opt.lr;
  cfg.seed = opt.seed;

  const std::vector<AdversaryTask> single{task_at(white_field(rng, opt.grid, opt.grid))};
  const AdversaryTrainResult trained = train_adversary(
      {FieldParams::init({opt.grid, opt.grid, opt.hidden, false}, derive_seed(opt.seed, 1)), cfg},
      single, op, trust);
  const double cos = adversary_cosine(trained.state.params, single, op, trust);
  rep.headline = "prop2: cosine=" + fmt(cos);
  rep.add("fixed_state_cosine", cos > opt.threshold,
          "H^s cosine " + fmt(cos) + " after " + std::to_string(opt.steps) + " steps, width " +
              std::to_string(opt.hidden));
  rep.add("energy_decreases",
          !trained.loss_curve.empty() && trained.loss_curve.back() < trained.loss_curve.front(),
          "J " + (trained.loss_curve.empty() ? std::string("-") : fmt(trained.loss_curve.front())) +
              " -> " + (trained.loss_curve.empty() ? std::string("-") : fmt(trained.loss_curve.back())));

  std::vector<AdversaryTask> states;
  for (std::size_t i = 0; i < opt.sweep_states; ++i) states.push_back(task_at(white_field(rng, opt.grid, opt.grid)));
  const CapacityReport cap =
      capacity_sweep(opt.widths, states, op, trust, cfg, opt.threshold, opt.saturation_width);
  std::string table;
  for (const auto& r : cap.rows)
    table += (table.empty() ? "" : ", ") + std::to_string(r.width) + ":" + fmt(r.cosine);
  rep.add("capacity_nondecreasing", cap.nondecreasing, "width:cosine " + table);
  rep.add("capacity_saturated", cap.saturated,
          "cosine >= " + fmt(opt.threshold) + " from width " + std::to_string(opt.saturation_width));
  return rep;
}

VerifyReport verify_spectral_identities(const SpectralOptions& opt) {
  VerifyReport rep;
  rep.suite = "spectral";
  const std::pair<std::size_t, std::size_t> shapes[] = {{8, 8}, {16, 16}, {32, 32}, {33, 17}};
  double parseval = 0.0, roundtrip = 0.0, norms = 0.0;
  Rng rng(opt.seed);
  for (const auto& [r, c] : shapes) {
    const SobolevOperator op(1.5, r, c);
    for (int k = 0; k < opt.fields_per_shape; ++k) {
      const Field2D f = white_field(rng, r, c);
      const double e = squared_norm(f);
      parseval = std::max(parseval, std::abs(squared_norm(op.plan().forward(f)) - e) / e);
      roundtrip = std::max(roundtrip, max_abs(apply_sigma(op, apply_sigma_inv(op, f)), f));
      const double a = sobolev_norm_sq(op, f), b = dot(f, apply_sigma_inv(op, f));
      norms = std::max(norms, std::abs(a - b) / a);
    }
  }
  rep.headline = "spectral: parseval=" + fmt(parseval);
  rep.add("parseval", parseval <= 1e-10, "max relative error " + fmt(parseval));
  rep.add("sigma_roundtrip", roundtrip <= 1e-9, "max |Sigma Sigma^-1 f - f| = " + fmt(roundtrip));
  rep.add("norm_routes", norms <= 1e-9, "max relative gap " + fmt(norms));
  return rep;
}

VerifyReport verify_coloring(const SpectralOptions& opt) {
  VerifyReport rep;
  rep.suite = "coloring";
  const std::size_t n = opt.coloring_grid;
  double worst_all = 0.0;
  for (std::size_t oi = 0; oi < opt.coloring_orders.size(); ++oi) {
    const double s = opt.coloring_orders[oi];
    auto op = std::make_shared<const SobolevOperator>(s, n, n);
    NoiseSampler sampler(derive_seed(opt.seed, oi), op);
    std::vector<double> var(n * n, 0.0);
    for (std::size_t k = 0; k < opt.coloring_samples; ++k) {
      const Spectrum2D sp = op->plan().forward(sampler.sample_colored());
      for (std::size_t i = 0; i < var.size(); ++i) var[i] += sp[i] * sp[i];
    }
    double worst = 0.0;
    const auto w = op->weights();
    for (std::size_t i = 0; i < var.size(); ++i)
      worst = std::max(worst, std::abs(var[i] / static_cast<double>(opt.coloring_samples) / w[i] - 1.0));
    worst_all = std::max(worst_all, worst);
    rep.add("variance_s=" + fmt(s), worst <= opt.coloring_tolerance,
            "max per-bin relative deviation from D_s " + fmt(worst));
  }

  NoiseSampler white(derive_seed(opt.seed, 99), opt.white_grid, opt.white_grid);
  PsdAccumulator acc(opt.white_grid, opt.white_grid);
  for (std::size_t k = 0; k < opt.white_samples; ++k) acc.add(white.sample_white());
  const PsdEstimate psd = acc.finish();
  double lo = 1e300, hi = 0.0;
  for (const auto& b : psd.radial_bins) {
    lo = std::min(lo, b.power);
    hi = std::max(hi, b.power);
  }
  rep.add("white_flat", hi / lo < 1.5, "max/min radial power " + fmt(hi / lo));
  rep.headline = "coloring: max_deviation=" + fmt(worst_all);
  return rep;
}

} // namespace sobo
