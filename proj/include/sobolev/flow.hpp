#pragma once

#include "sobolev/field.hpp"

#include <functional>

namespace sobo {

/// Velocity evaluator v(x, t, c).
using VelocityFn = std::function<Field2D(const Field2D& x, double t, const Field2D& cond)>;

inline constexpr double kDefaultTMax = 0.99;
inline constexpr double kDefaultHorizon = 0.99;
inline constexpr int kDefaultEulerSteps = 28;

struct TrajectoryConfig {
  int steps = kDefaultEulerSteps;
  double t_max = kDefaultTMax; // conditional target is refused at t >= t_max
  double horizon = kDefaultHorizon; // training times drawn from U(0, horizon)

  void validate() const;
};

/// One point on the straight noise-to-data path. Built only through make().
class FlowSample {
public:
  static FlowSample make(Field2D x0, Field2D x1, Field2D cond, double t);

  const Field2D& x0() const noexcept { return x0_; }
  const Field2D& x1() const noexcept { return x1_; }
  const Field2D& cond() const noexcept { return cond_; }
  double t() const noexcept { return t_; }
  const Field2D& xt() const noexcept { return xt_; }

private:
  FlowSample() = default;
  Field2D x0_, x1_, cond_, xt_;
  double t_ = 0.0;
};

/// (1 - t) x0 + t x1.
Field2D interpolate(const Field2D& x0, const Field2D& x1, double t);

/// x1 - x0, the path velocity (independent of t).
Field2D target_velocity_marginal(const Field2D& x0, const Field2D& x1);

/// (x1 - xt) / (1 - t). Throws SingularityError when t >= t_max.
Field2D target_velocity_conditional(const Field2D& xt, const Field2D& x1, double t,
                                    double t_max = kDefaultTMax);

/// Mean over cells of (v_pred - (x1 - x0))^2.
double cfm_loss(const Field2D& v_pred, const Field2D& x0, const Field2D& x1);

/// d cfm_loss / d v_pred.
Field2D cfm_loss_grad(const Field2D& v_pred, const Field2D& x0, const Field2D& x1);

/// Forward Euler from t = 0 to t = 1 on the uniform grid t_k = k / steps.
/// Throws DivergenceError naming the step at which the state stopped being finite.
Field2D euler_integrate(const VelocityFn& v, const Field2D& x0, const Field2D& cond,
                        const TrajectoryConfig& cfg);

/// Puts an endpoint estimate back on the path of the same noise: (1 - t) x0 + t x1_hat.
Field2D reproject(const Field2D& x0, const Field2D& x1_hat, double t);

} // namespace sobo
