#pragma once

#include "sobolev/flow.hpp"
#include "sobolev/param_field.hpp"
#include "sobolev/spectral.hpp"

#include <vector>

namespace sobo {

inline constexpr double kDefaultBeta = 2000.0;

/// One preference triplet with its shared noise and time. For AS-DPO the
/// loser endpoint is synthesised and `loser` may be left empty.
struct PreferenceItem {
  Field2D cond;
  Field2D winner;
  Field2D loser;
  Field2D x0;
  double t = 0.0;
};

struct PreferenceBatch {
  std::vector<PreferenceItem> items;
  double beta = kDefaultBeta;
};

/// A winner branch and a loser branch evaluated at the same (x0, t).
/// Each branch is a flow state plus the endpoint its target field points to.
struct PreferencePair {
  Field2D cond;
  double t = 0.0;
  Field2D winner_state, winner_target;
  Field2D loser_state, loser_target;
};

struct EnergyGap {
  double value = 0.0;
  double policy_energy = 0.0;
  double reference_energy = 0.0;
};

/// v(xt, cond, t) - (x1 - xt) / (1 - t).
Field2D residual(const VelocityFn& v, const Field2D& xt, const Field2D& cond, double t,
                 const Field2D& x1, double t_max = kDefaultTMax);

/// -(|g_pol|^2 - |g_ref|^2); the 1/(2 eta^2) factor is absorbed into beta.
double log_ratio_l2(const Field2D& gamma_pol, const Field2D& gamma_ref);

/// |g_pol|^2_{H^s} - |g_ref|^2_{H^s}.
EnergyGap energy_gap(const SobolevOperator& op, const Field2D& gamma_pol,
                     const Field2D& gamma_ref);

/// log(1 + e^x) without overflow.
double softplus(double x) noexcept;
/// 1 / (1 + e^-x) without overflow.
double sigmoid(double x) noexcept;

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;        // d loss / d policy parameters
  std::vector<double> logits;      // per-pair beta * (gap_loser - gap_winner) / cells
};

/// Residual metric used inside the preference logit.
enum class ResidualMetric { L2, Sobolev };

/// Mean over pairs of softplus(-z), z = beta * (gap_loser - gap_winner) / cells.
/// Gaps are per-cell energies so beta keeps the scale it has with pixel-mean
/// losses. Under the Sobolev metric each energy is also divided by
/// op->mean_inv_weight(), so white noise costs the same under both metrics.
/// Reference residuals are constants; only the policy gets gradients.
LossAndGrad preference_loss(std::span<const PreferencePair> pairs, double beta,
                            const FieldParams& policy, const FieldParams& reference,
                            ResidualMetric metric, const SobolevOperator* op,
                            double t_max = kDefaultTMax);

/// Builds winner/loser states on the shared path of each item's x0 and t.
std::vector<PreferencePair> static_pairs(const PreferenceBatch& batch);

/// Euclidean baseline objective (L2-DPO) on static pairs.
LossAndGrad dpo_l2_loss(const PreferenceBatch& batch, const FieldParams& policy,
                        const FieldParams& reference, double t_max = kDefaultTMax);

/// Sobolev objective (S-DPO) on static pairs.
LossAndGrad sdpo_loss(const PreferenceBatch& batch, const FieldParams& policy,
                      const FieldParams& reference, const SobolevOperator& op,
                      double t_max = kDefaultTMax);

/// Adversarial objective (AS-DPO): the loser branch of each item comes from
/// coupled sampling with the frozen adversary velocity `adversary`.
LossAndGrad asdpo_loss(const PreferenceBatch& batch, const FieldParams& policy,
                       const FieldParams& reference, const VelocityFn& adversary,
                       const SobolevOperator& op, double t_max = kDefaultTMax);

} // namespace sobo
