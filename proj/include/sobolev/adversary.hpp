#pragma once

#include "sobolev/dpo.hpp"
#include "sobolev/noise.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace sobo {

/// Sobolev-norm budget eps_t for the adversarial perturbation.
struct TrustRegion {
  enum class Schedule { Constant, Linear };

  double epsilon = 0.1;
  Schedule schedule = Schedule::Constant;

  /// Constant: eps. Linear: eps * (1 - t), floored at 1e-3 * eps so it stays positive.
  double at(double t) const;
  void validate() const;
};

struct EnergyAndGrad {
  double value = 0.0;
  Field2D grad;
};

/// Scalar energy of a state with its gradient.
using EnergyFn = std::function<EnergyAndGrad(const Field2D& x)>;

/// J(x) = |v(x, t, c) - (x1 - x)/(1 - t)|^2 with dJ/dx through the policy's
/// backward pass plus the target term d u / dx = -I / (1 - t).
EnergyAndGrad residual_energy(const FieldParams& policy, const Field2D& xt, const Field2D& cond,
                              double t, const Field2D& x1, double t_max = kDefaultTMax);

EnergyFn residual_energy_fn(const FieldParams& policy, Field2D cond, double t, Field2D x1,
                            double t_max = kDefaultTMax);

/// J(x) = (x - center)^T A (x - center), A symmetric positive definite given
/// as a dense row-major matrix; an empty matrix means A = I.
class QuadraticEnergy {
public:
  explicit QuadraticEnergy(Field2D center, std::vector<double> hessian_half = {});

  /// Random A = I + scale * B B^T / n, B standard normal.
  static QuadraticEnergy random_spd(Field2D center, double scale, Rng& rng);

  EnergyAndGrad operator()(const Field2D& x) const;
  const Field2D& center() const noexcept { return center_; }

private:
  Field2D center_;
  std::vector<double> a_; // n x n, empty for identity
};

/// Worst-case Sobolev perturbation -eps Sigma_s g / sqrt(<g, Sigma_s g>).
/// Returns nullopt for a (numerically) zero gradient so the caller can skip it.
std::optional<Field2D> optimal_delta(const SobolevOperator& op, const Field2D& grad, double eps);

/// <a, b>_{H^s} / (|a|_{H^s} |b|_{H^s}); 0 when either is zero.
double hs_cosine(const SobolevOperator& op, const Field2D& a, const Field2D& b);

/// Radial rescale onto the closed H^s ball of radius eps (identity inside).
/// This is the H^s-orthogonal projection.
Field2D project_to_ball(const SobolevOperator& op, const Field2D& a, double eps);

/// Vector-Jacobian product of project_to_ball at `a` for cotangent `upstream`.
Field2D project_to_ball_vjp(const SobolevOperator& op, const Field2D& a, double eps,
                            const Field2D& upstream);

struct PgdConfig {
  int iterations = 200;
  double step = 0.25; // in the H^s-preconditioned geometry
};

/// Constrained minimiser of J(x + d) over |d|_{H^s} <= eps by projected
/// gradient descent in the H^s geometry: d <- P(d - step Sigma_s grad J(x + d)),
/// starting from d = 0. Independent of optimal_delta; used as its oracle.
Field2D projected_gradient_minimize(const EnergyFn& energy, const Field2D& x,
                                    const SobolevOperator& op, double eps,
                                    const PgdConfig& cfg = {});

struct DescentCheck {
  bool degenerate = false;
  double decrease = 0.0;             // J(x + delta*) - J(x)
  double linear_decrease = 0.0;      // <grad J, delta*>
  double best_random_decrease = 0.0; // min over random directions of J(x + d) - J(x)
  int random_directions = 0;
};

/// Compares delta* against random directions on the same H^s sphere.
DescentCheck first_order_descent_check(const EnergyFn& energy, const Field2D& x,
                                       const SobolevOperator& op, double eps = 1e-3,
                                       int random_directions = 100, std::uint64_t seed = 7);

struct CoupledSample {
  Field2D x1_hat; // x_t^w + (1 - t) v(x_t^w, t, c)
  Field2D xt_adv; // (1 - t) x0 + t x1_hat
};

/// Extrapolates the adversary velocity to an endpoint and re-projects it onto
/// the path of the winner's own noise x0 at the same t.
CoupledSample couple_sample(const VelocityFn& v_adv, const Field2D& xt_winner, const Field2D& x0,
                            const Field2D& cond, double t, double t_max = kDefaultTMax);

/// One state the adversary is trained on: inputs to A_phi plus the energy
/// J evaluated at the perturbed state.
struct AdversaryTask {
  Field2D xt;
  Field2D cond;
  double t = 0.0;
  EnergyFn energy;
};

struct AdversaryTrainConfig {
  int steps = 2000;
  AdamConfig adam{};
  std::size_t batch = 0; // 0: every task every step
  std::uint64_t seed = 42;
};

struct AdversaryState {
  FieldParams params;
  AdversaryTrainConfig config;
};

struct AdversaryTrainResult {
  AdversaryState state;
  std::vector<double> loss_curve; // mean J(x + P(A(x))) per step, before the update
};

/// Differentiable perturbation model interface used by the training loop.
/// output() must be deterministic; backprop() adds parameter gradients.
struct PerturbationModel {
  virtual ~PerturbationModel() = default;
  virtual Field2D output(const AdversaryTask& task, ForwardCache& cache) const = 0;
  virtual void backprop(const ForwardCache& cache, const Field2D& upstream,
                        std::span<double> grad) const = 0;
  virtual std::span<double> mutable_params() = 0;
  virtual std::size_t param_count() const = 0;
};

/// Minimises mean_i J_i(x_i + P_eps(A(x_i))) with Adam. The budget is enforced
/// by projection, so every evaluated perturbation is feasible.
std::vector<double> train_perturbation(PerturbationModel& model,
                                       std::span<const AdversaryTask> tasks,
                                       const SobolevOperator& op, const TrustRegion& trust,
                                       const AdversaryTrainConfig& cfg);

/// Trains the MLP adversary A_phi (policy frozen inside the task energies).
AdversaryTrainResult train_adversary(AdversaryState adversary,
                                     std::span<const AdversaryTask> tasks,
                                     const SobolevOperator& op, const TrustRegion& trust);

/// Projected adversary output P_eps(A_phi(x, t, c)).
Field2D adversary_perturbation(const FieldParams& adversary, const Field2D& xt,
                               const Field2D& cond, double t, const SobolevOperator& op,
                               const TrustRegion& trust);

/// Adversary velocity used for coupled sampling: the frozen base velocity plus
/// the projected correction, v_phi = v_base + P_eps(A_phi).
VelocityFn adversary_velocity(const FieldParams& adversary, const FieldParams& base,
                              const SobolevOperator& op, const TrustRegion& trust);

/// Mean H^s cosine between P_eps(A_phi(x_i)) and delta*(x_i) over tasks with a
/// non-degenerate gradient.
double adversary_cosine(const FieldParams& adversary, std::span<const AdversaryTask> tasks,
                        const SobolevOperator& op, const TrustRegion& trust);

struct CapacityRow {
  std::size_t width = 0;
  double final_energy = 0.0;
  double cosine = 0.0;
};

struct CapacityReport {
  std::vector<CapacityRow> rows;
  bool nondecreasing = true; // ties among rows at or above the threshold allowed
  bool saturated = false; // every row from the first width >= saturation_width reaches threshold
};

/// Trains one adversary per hidden width on the same tasks and seed.
CapacityReport capacity_sweep(std::span<const std::size_t> widths,
                              std::span<const AdversaryTask> tasks, const SobolevOperator& op,
                              const TrustRegion& trust, const AdversaryTrainConfig& cfg,
                              double threshold = 0.99, std::size_t saturation_width = 8);

} // namespace sobo
