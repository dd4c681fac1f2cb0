#include "sobolev/dpo.hpp"

#include "sobolev/adversary.hpp"

#include <cmath>

namespace sobo {

Field2D residual(const VelocityFn& v, const Field2D& xt, const Field2D& cond, double t,
                 const Field2D& x1, double t_max) {
  const Field2D target = target_velocity_conditional(xt, x1, t, t_max);
  Field2D out = v(xt, t, cond);
  require_same_shape(out, target, "residual");
  out -= target;
  return out;
}

double log_ratio_l2(const Field2D& gamma_pol, const Field2D& gamma_ref) {
  require_same_shape(gamma_pol, gamma_ref, "log_ratio_l2");
  return -(squared_norm(gamma_pol) - squared_norm(gamma_ref));
}

EnergyGap energy_gap(const SobolevOperator& op, const Field2D& gamma_pol,
                     const Field2D& gamma_ref) {
  require_same_shape(gamma_pol, gamma_ref, "energy_gap");
  EnergyGap g;
  g.policy_energy = sobolev_norm_sq(op, gamma_pol);
  g.reference_energy = sobolev_norm_sq(op, gamma_ref);
  g.value = g.policy_energy - g.reference_energy;
  return g;
}

double softplus(double x) noexcept {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

struct Branch {
  Field2D gamma_pol;
  ForwardCache cache;
  double pol_energy = 0.0;
  double ref_energy = 0.0;
};

// H^s energies are divided by the white-noise gain of the metric so one beta
// means the same thing for every s.
double energy_of(const Field2D& g, ResidualMetric metric, const SobolevOperator* op) {
  if (metric == ResidualMetric::L2) return squared_norm(g);
  return sobolev_norm_sq(*op, g) / op->mean_inv_weight();
}

// Gradient of energy_of with respect to g.
Field2D energy_grad(const Field2D& g, ResidualMetric metric, const SobolevOperator* op) {
  if (metric == ResidualMetric::L2) return 2.0 * g;
  return (2.0 / op->mean_inv_weight()) * apply_sigma_inv(*op, g);
}

Branch evaluate_branch(const Field2D& state, const Field2D& target, const Field2D& cond, double t,
                       const FieldParams& policy, const FieldParams& reference,
                       ResidualMetric metric, const SobolevOperator* op, double t_max) {
  Branch b;
  const Field2D u = target_velocity_conditional(state, target, t, t_max);
  b.gamma_pol = forward(policy, state, cond, t, &b.cache) - u;
  const Field2D gamma_ref = forward(reference, state, cond, t) - u;
  b.pol_energy = energy_of(b.gamma_pol, metric, op);
  b.ref_energy = energy_of(gamma_ref, metric, op);
  return b;
}

} // namespace

LossAndGrad preference_loss(std::span<const PreferencePair> pairs, double beta,
                            const FieldParams& policy, const FieldParams& reference,
                            ResidualMetric metric, const SobolevOperator* op, double t_max) {
  if (pairs.empty()) throw ValidationError("preference_loss: empty batch");
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw ValidationError("preference_loss: beta must be positive");
  if (!(policy.shape() == reference.shape()))
    throw ValidationError("preference_loss: policy and reference shapes differ");
  if (metric == ResidualMetric::Sobolev && op == nullptr)
    throw ValidationError("preference_loss: Sobolev metric needs an operator");

  LossAndGrad out;
  out.grad = policy.zero_grad();
  const double cells = static_cast<double>(policy.shape().cells());
  const double inv_batch = 1.0 / static_cast<double>(pairs.size());
  for (const auto& pair : pairs) {
    const Branch w = evaluate_branch(pair.winner_state, pair.winner_target, pair.cond, pair.t,
                                     policy, reference, metric, op, t_max);
    const Branch l = evaluate_branch(pair.loser_state, pair.loser_target, pair.cond, pair.t,
                                     policy, reference, metric, op, t_max);
    const double gap_w = w.pol_energy - w.ref_energy;
    const double gap_l = l.pol_energy - l.ref_energy;
    const double z = beta * (gap_l - gap_w) / cells;
    if (!std::isfinite(z)) throw DivergenceError("preference_loss: non-finite logit", 0);
    out.logits.push_back(z);
    out.loss += softplus(-z) * inv_batch;

    // d softplus(-z) / dz = -sigmoid(-z)
    const double dz = -sigmoid(-z) * inv_batch * beta / cells;
    backward(policy, l.cache, dz * energy_grad(l.gamma_pol, metric, op), out.grad);
    backward(policy, w.cache, -dz * energy_grad(w.gamma_pol, metric, op), out.grad);
  }
  return out;
}

std::vector<PreferencePair> static_pairs(const PreferenceBatch& batch) {
  std::vector<PreferencePair> pairs;
  pairs.reserve(batch.items.size());
  for (const auto& it : batch.items) {
    PreferencePair p;
    p.cond = it.cond;
    p.t = it.t;
    p.winner_state = interpolate(it.x0, it.winner, it.t);
    p.winner_target = it.winner;
    p.loser_state = interpolate(it.x0, it.loser, it.t);
    p.loser_target = it.loser;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

LossAndGrad dpo_l2_loss(const PreferenceBatch& batch, const FieldParams& policy,
                        const FieldParams& reference, double t_max) {
  const auto pairs = static_pairs(batch);
  return preference_loss(pairs, batch.beta, policy, reference, ResidualMetric::L2, nullptr, t_max);
}

LossAndGrad sdpo_loss(const PreferenceBatch& batch, const FieldParams& policy,
                      const FieldParams& reference, const SobolevOperator& op, double t_max) {
  const auto pairs = static_pairs(batch);
  return preference_loss(pairs, batch.beta, policy, reference, ResidualMetric::Sobolev, &op,
                         t_max);
}

LossAndGrad asdpo_loss(const PreferenceBatch& batch, const FieldParams& policy,
                       const FieldParams& reference, const VelocityFn& adversary,
                       const SobolevOperator& op, double t_max) {
  std::vector<PreferencePair> pairs;
  pairs.reserve(batch.items.size());
  for (const auto& it : batch.items) {
    PreferencePair p;
    p.cond = it.cond;
    p.t = it.t;
    p.winner_state = interpolate(it.x0, it.winner, it.t);
    p.winner_target = it.winner;
    const CoupledSample cs = couple_sample(adversary, p.winner_state, it.x0, it.cond, it.t, t_max);
    p.loser_state = cs.xt_adv;
    p.loser_target = cs.x1_hat;
    pairs.push_back(std::move(p));
  }
  return preference_loss(pairs, batch.beta, policy, reference, ResidualMetric::Sobolev, &op,
                         t_max);
}

} // namespace sobo
