#include "sobolev/flow.hpp"

#include <string>

namespace sobo {

namespace {

void require_unit_time(double t, const char* where) {
  if (!(t >= 0.0 && t <= 1.0))
    throw ValidationError(std::string(where) + ": t must lie in [0, 1], got " + std::to_string(t));
}

} // namespace

void TrajectoryConfig::validate() const {
  if (steps < 1) throw ValidationError("TrajectoryConfig: steps must be >= 1");
  if (!(t_max > 0.0 && t_max <= 1.0)) throw ValidationError("TrajectoryConfig: t_max must be in (0, 1]");
  if (!(horizon > 0.0 && horizon <= 1.0))
    throw ValidationError("TrajectoryConfig: horizon must be in (0, 1]");
}

FlowSample FlowSample::make(Field2D x0, Field2D x1, Field2D cond, double t) {
  require_same_shape(x0, x1, "FlowSample");
  require_same_shape(x0, cond, "FlowSample");
  FlowSample s;
  s.xt_ = interpolate(x0, x1, t);
  s.x0_ = std::move(x0);
  s.x1_ = std::move(x1);
  s.cond_ = std::move(cond);
  s.t_ = t;
  return s;
}

Field2D interpolate(const Field2D& x0, const Field2D& x1, double t) {
  require_same_shape(x0, x1, "interpolate");
  require_unit_time(t, "interpolate");
  Field2D out(x0.rows(), x0.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - t) * x0[i] + t * x1[i];
  return out;
}

Field2D target_velocity_marginal(const Field2D& x0, const Field2D& x1) { return x1 - x0; }

Field2D target_velocity_conditional(const Field2D& xt, const Field2D& x1, double t, double t_max) {
  require_same_shape(xt, x1, "target_velocity_conditional");
  if (!(t >= 0.0)) throw ValidationError("target_velocity_conditional: t must be >= 0");
  if (t >= t_max)
    throw SingularityError("target_velocity_conditional: t=" + std::to_string(t) +
                           " reaches t_max=" + std::to_string(t_max));
  const double inv = 1.0 / (1.0 - t);
  Field2D out(xt.rows(), xt.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x1[i] - xt[i]) * inv;
  return out;
}

double cfm_loss(const Field2D& v_pred, const Field2D& x0, const Field2D& x1) {
  require_same_shape(v_pred, x0, "cfm_loss");
  require_same_shape(x0, x1, "cfm_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < v_pred.size(); ++i) {
    const double d = v_pred[i] - (x1[i] - x0[i]);
    s += d * d;
  }
  return s / static_cast<double>(v_pred.size());
}

Field2D cfm_loss_grad(const Field2D& v_pred, const Field2D& x0, const Field2D& x1) {
  require_same_shape(v_pred, x0, "cfm_loss_grad");
  require_same_shape(x0, x1, "cfm_loss_grad");
  const double scale = 2.0 / static_cast<double>(v_pred.size());
  Field2D g(v_pred.rows(), v_pred.cols());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (v_pred[i] - (x1[i] - x0[i]));
  return g;
}

Field2D euler_integrate(const VelocityFn& v, const Field2D& x0, const Field2D& cond,
                        const TrajectoryConfig& cfg) {
  if (cfg.steps < 1) throw ValidationError("euler_integrate: steps must be >= 1");
  require_same_shape(x0, cond, "euler_integrate");
  const double dt = 1.0 / static_cast<double>(cfg.steps);
  Field2D x = x0;
  for (int k = 0; k < cfg.steps; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(cfg.steps);
    const Field2D vel = v(x, t, cond);
    require_same_shape(vel, x, "euler_integrate velocity");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += dt * vel[i];
    if (!x.all_finite()) throw DivergenceError("euler_integrate: state became non-finite", k);
  }
  return x;
}

Field2D reproject(const Field2D& x0, const Field2D& x1_hat, double t) {
  require_unit_time(t, "reproject");
  return interpolate(x0, x1_hat, t);
}

} // namespace sobo
