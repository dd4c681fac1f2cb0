#include "sobolev/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sobo {

double TrustRegion::at(double t) const {
  switch (schedule) {
  case Schedule::Constant:
    return epsilon;
  case Schedule::Linear:
    return std::max(epsilon * (1.0 - t), 1e-3 * epsilon);
  }
  return epsilon;
}

void TrustRegion::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ValidationError("TrustRegion: epsilon must be positive");
}

EnergyAndGrad residual_energy(const FieldParams& policy, const Field2D& xt, const Field2D& cond,
                              double t, const Field2D& x1, double t_max) {
  const Field2D u = target_velocity_conditional(xt, x1, t, t_max);
  ForwardCache cache;
  const Field2D gamma = forward(policy, xt, cond, t, &cache) - u;
  EnergyAndGrad out;
  out.value = squared_norm(gamma);
  std::vector<double> scratch = policy.zero_grad();
  const Field2D up = 2.0 * gamma;
  out.grad = backward(policy, cache, up, scratch);
  // gamma = v(x) - (x1 - x)/(1 - t)  =>  d gamma / dx = dv/dx + I/(1 - t)
  out.grad += (1.0 / (1.0 - t)) * up;
  return out;
}

EnergyFn residual_energy_fn(const FieldParams& policy, Field2D cond, double t, Field2D x1,
                            double t_max) {
  return [&policy, cond = std::move(cond), t, x1 = std::move(x1), t_max](const Field2D& x) {
    return residual_energy(policy, x, cond, t, x1, t_max);
  };
}

QuadraticEnergy::QuadraticEnergy(Field2D center, std::vector<double> hessian_half)
    : center_(std::move(center)), a_(std::move(hessian_half)) {
  const std::size_t n = center_.size();
  if (!a_.empty() && a_.size() != n * n)
    throw ValidationError("QuadraticEnergy: matrix must be n x n");
}

QuadraticEnergy QuadraticEnergy::random_spd(Field2D center, double scale, Rng& rng) {
  const std::size_t n = center.size();
  std::vector<double> b(n * n);
  for (double& v : b) v = rng.normal();
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += b[i * n + k] * b[j * n + k];
      s *= scale / static_cast<double>(n);
      if (i == j) s += 1.0;
      a[i * n + j] = s;
      a[j * n + i] = s;
    }
  }
  return QuadraticEnergy(std::move(center), std::move(a));
}

EnergyAndGrad QuadraticEnergy::operator()(const Field2D& x) const {
  require_same_shape(x, center_, "QuadraticEnergy");
  const Field2D d = x - center_;
  EnergyAndGrad out;
  if (a_.empty()) {
    out.value = squared_norm(d);
    out.grad = 2.0 * d;
    return out;
  }
  const std::size_t n = d.size();
  Field2D ad(x.rows(), x.cols());
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += a_[i * n + k] * d[k];
    ad[i] = s;
  }
  out.value = dot(d, ad);
  out.grad = 2.0 * ad;
  return out;
}

std::optional<Field2D> optimal_delta(const SobolevOperator& op, const Field2D& grad, double eps) {
  if (!(eps > 0.0)) throw ValidationError("optimal_delta: eps must be positive");
  op.require_shape(grad, "optimal_delta");
  const Field2D sg = apply_sigma(op, grad);
  const double denom_sq = dot(grad, sg);
  // Sigma_s is positive definite, so this vanishes only for a zero gradient.
  if (!(denom_sq > 0.0) || !std::isfinite(denom_sq)) return std::nullopt;
  return (-eps / std::sqrt(denom_sq)) * sg;
}

double hs_cosine(const SobolevOperator& op, const Field2D& a, const Field2D& b) {
  const double na = sobolev_norm_sq(op, a);
  const double nb = sobolev_norm_sq(op, b);
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return sobolev_inner(op, a, b) / std::sqrt(na * nb);
}

Field2D project_to_ball(const SobolevOperator& op, const Field2D& a, double eps) {
  const double r = std::sqrt(sobolev_norm_sq(op, a));
  if (r <= eps) return a;
  return (eps / r) * a;
}

Field2D project_to_ball_vjp(const SobolevOperator& op, const Field2D& a, double eps,
                            const Field2D& upstream) {
  const double r = std::sqrt(sobolev_norm_sq(op, a));
  if (r <= eps) return upstream;
  // d(eps a / r)/da applied transposed: eps (u / r - <u, a> Sigma^-1 a / r^3)
  const Field2D sinv_a = apply_sigma_inv(op, a);
  const double ua = dot(upstream, a);
  Field2D out = (eps / r) * upstream;
  out -= (eps * ua / (r * r * r)) * sinv_a;
  return out;
}

Field2D projected_gradient_minimize(const EnergyFn& energy, const Field2D& x,
                                    const SobolevOperator& op, double eps,
                                    const PgdConfig& cfg) {
  if (cfg.iterations < 1 || !(cfg.step > 0.0))
    throw ValidationError("projected_gradient_minimize: bad iteration settings");
  Field2D d(x.rows(), x.cols());
  for (int it = 0; it < cfg.iterations; ++it) {
    const EnergyAndGrad eg = energy(x + d);
    Field2D next = d - cfg.step * apply_sigma(op, eg.grad);
    d = project_to_ball(op, next, eps);
    if (!d.all_finite()) throw DivergenceError("projected_gradient_minimize diverged", it);
  }
  return d;
}

DescentCheck first_order_descent_check(const EnergyFn& energy, const Field2D& x,
                                       const SobolevOperator& op, double eps,
                                       int random_directions, std::uint64_t seed) {
  DescentCheck rep;
  const EnergyAndGrad base = energy(x);
  const auto delta = optimal_delta(op, base.grad, eps);
  if (!delta) {
    rep.degenerate = true;
    return rep;
  }
  rep.decrease = energy(x + *delta).value - base.value;
  rep.linear_decrease = dot(base.grad, *delta);
  rep.random_directions = random_directions;
  rep.best_random_decrease = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  for (int k = 0; k < random_directions; ++k) {
    Field2D r = white_field(rng, x.rows(), x.cols());
    r *= eps / std::sqrt(sobolev_norm_sq(op, r));
    rep.best_random_decrease = std::min(rep.best_random_decrease, energy(x + r).value - base.value);
  }
  return rep;
}

CoupledSample couple_sample(const VelocityFn& v_adv, const Field2D& xt_winner, const Field2D& x0,
                            const Field2D& cond, double t, double t_max) {
  require_same_shape(xt_winner, x0, "couple_sample");
  if (!(t >= 0.0)) throw ValidationError("couple_sample: t must be >= 0");
  if (t >= t_max)
    throw SingularityError("couple_sample: t=" + std::to_string(t) + " reaches t_max");
  CoupledSample out;
  out.x1_hat = axpy(1.0 - t, v_adv(xt_winner, t, cond), xt_winner);
  out.xt_adv = reproject(x0, out.x1_hat, t);
  return out;
}

namespace {

class MlpPerturbation final : public PerturbationModel {
public:
  explicit MlpPerturbation(FieldParams& p) : p_(p) {}

  Field2D output(const AdversaryTask& task, ForwardCache& cache) const override {
    return forward(p_, task.xt, task.cond, task.t, &cache);
  }
  void backprop(const ForwardCache& cache, const Field2D& upstream,
                std::span<double> grad) const override {
    backward(p_, cache, upstream, grad);
  }
  std::span<double> mutable_params() override { return p_.mutable_values(); }
  std::size_t param_count() const override { return p_.param_count(); }

private:
  FieldParams& p_;
};

} // namespace

std::vector<double> train_perturbation(PerturbationModel& model,
                                       std::span<const AdversaryTask> tasks,
                                       const SobolevOperator& op, const TrustRegion& trust,
                                       const AdversaryTrainConfig& cfg) {
  trust.validate();
  if (tasks.empty()) throw ValidationError("train_adversary: no training states");
  if (cfg.steps < 0) throw ValidationError("train_adversary: steps must be >= 0");
  const std::size_t batch =
      cfg.batch == 0 || cfg.batch >= tasks.size() ? tasks.size() : cfg.batch;
  Rng rng(derive_seed(cfg.seed, 0xad7e));
  AdamState adam;
  std::vector<double> grad(model.param_count());
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(cfg.steps));
  std::vector<std::size_t> picks(batch);
  for (int step = 0; step < cfg.steps; ++step) {
    if (batch == tasks.size()) {
      for (std::size_t i = 0; i < batch; ++i) picks[i] = i;
    } else {
      for (auto& i : picks) i = rng.below(tasks.size());
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(batch);
    for (std::size_t i : picks) {
      const AdversaryTask& task = tasks[i];
      const double eps = trust.at(task.t);
      ForwardCache cache;
      const Field2D a = model.output(task, cache);
      const Field2D delta = project_to_ball(op, a, eps);
      const EnergyAndGrad eg = task.energy(task.xt + delta);
      loss += eg.value * inv;
      model.backprop(cache, project_to_ball_vjp(op, a, eps, inv * eg.grad), grad);
    }
    if (!std::isfinite(loss)) throw DivergenceError("train_adversary: non-finite loss", step);
    curve.push_back(loss);
    adam_update(model.mutable_params(), grad, adam, cfg.adam);
  }
  return curve;
}

AdversaryTrainResult train_adversary(AdversaryState adversary,
                                     std::span<const AdversaryTask> tasks,
                                     const SobolevOperator& op, const TrustRegion& trust) {
  AdversaryTrainResult out{std::move(adversary), {}};
  MlpPerturbation model(out.state.params);
  out.loss_curve = train_perturbation(model, tasks, op, trust, out.state.config);
  return out;
}

Field2D adversary_perturbation(const FieldParams& adversary, const Field2D& xt,
                               const Field2D& cond, double t, const SobolevOperator& op,
                               const TrustRegion& trust) {
  return project_to_ball(op, forward(adversary, xt, cond, t), trust.at(t));
}

VelocityFn adversary_velocity(const FieldParams& adversary, const FieldParams& base,
                              const SobolevOperator& op, const TrustRegion& trust) {
  return [&adversary, &base, &op, trust](const Field2D& x, double t, const Field2D& c) {
    return forward(base, x, c, t) + adversary_perturbation(adversary, x, c, t, op, trust);
  };
}

double adversary_cosine(const FieldParams& adversary, std::span<const AdversaryTask> tasks,
                        const SobolevOperator& op, const TrustRegion& trust) {
  double sum = 0.0;
  int n = 0;
  for (const auto& task : tasks) {
    const auto star = optimal_delta(op, task.energy(task.xt).grad, trust.at(task.t));
    if (!star) continue;
    sum += hs_cosine(op, adversary_perturbation(adversary, task.xt, task.cond, task.t, op, trust),
                     *star);
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

CapacityReport capacity_sweep(std::span<const std::size_t> widths,
                              std::span<const AdversaryTask> tasks, const SobolevOperator& op,
                              const TrustRegion& trust, const AdversaryTrainConfig& cfg,
                              double threshold, std::size_t saturation_width) {
  if (widths.empty()) throw ValidationError("capacity_sweep: no widths");
  if (tasks.empty()) throw ValidationError("capacity_sweep: no tasks");
  CapacityReport rep;
  for (std::size_t w : widths) {
    NetShape shape{op.rows(), op.cols(), w, false};
    AdversaryState st{FieldParams::init(shape, derive_seed(cfg.seed, w)), cfg};
    const AdversaryTrainResult res = train_adversary(std::move(st), tasks, op, trust);
    CapacityRow row;
    row.width = w;
    double energy = 0.0;
    for (const auto& task : tasks) {
      const Field2D d =
          adversary_perturbation(res.state.params, task.xt, task.cond, task.t, op, trust);
      energy += task.energy(task.xt + d).value;
    }
    row.final_energy = energy / static_cast<double>(tasks.size());
    row.cosine = adversary_cosine(res.state.params, tasks, op, trust);
    rep.rows.push_back(row);
  }
  bool any_large = false;
  rep.saturated = true;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    // Once both widths reach the threshold the curve is on its plateau and
    // optimiser noise in the last digits is not a trend.
    if (i > 0 && rep.rows[i].cosine < rep.rows[i - 1].cosine &&
        !(rep.rows[i].cosine >= threshold && rep.rows[i - 1].cosine >= threshold))
      rep.nondecreasing = false;
    if (rep.rows[i].width >= saturation_width) {
      any_large = true;
      if (rep.rows[i].cosine < threshold) rep.saturated = false;
    }
  }
  rep.saturated = rep.saturated && any_large;
  return rep;
}

} // namespace sobo
