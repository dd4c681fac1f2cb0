#pragma once

#include "sobolev/field.hpp"

#include <memory>
#include <vector>

namespace sobo {

/// Orthonormal DCT-II basis matrices for one grid shape.
///
/// Forward transform is S = C_r F C_c^T, inverse F = C_r^T S C_c, where
/// C_n[k][j] = a_k cos(pi (2j+1) k / 2n), a_0 = sqrt(1/n), a_k = sqrt(2/n).
/// Both matrices are orthogonal, so Parseval holds with no correction factor.
class DctPlan {
public:
  DctPlan(std::size_t rows, std::size_t cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  Spectrum2D forward(const Field2D& f) const;
  Field2D inverse(const Spectrum2D& s) const;

private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> row_basis_; // rows x rows
  std::vector<double> col_basis_; // cols x cols
};

/// Shared, thread-safe cache of plans keyed by shape.
std::shared_ptr<const DctPlan> dct_plan(std::size_t rows, std::size_t cols);

Spectrum2D dct2_forward(const Field2D& f);
Field2D dct2_inverse(const Spectrum2D& s);

/// Diagonal-in-DCT operator with weights D_s(w) = (1 + |w|^2)^(-s), w the
/// integer bin index. Immutable after construction.
class SobolevOperator {
public:
  SobolevOperator(double order, std::size_t rows, std::size_t cols);

  double order() const noexcept { return order_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  /// True when s == 0; every table is exactly 1 and applications are copies.
  bool is_identity() const noexcept { return order_ == 0.0; }

  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> inv_weights() const noexcept { return inv_weights_; }
  std::span<const double> sqrt_weights() const noexcept { return sqrt_weights_; }

  double weight(std::size_t kx, std::size_t ky) const { return weights_[kx * cols_ + ky]; }

  /// Mean of (1 + |w|^2)^s over all bins: the expected H^s energy per unit
  /// L2 energy of white noise. Exactly 1 when s == 0.
  double mean_inv_weight() const noexcept { return mean_inv_weight_; }

  const DctPlan& plan() const noexcept { return *plan_; }

  void require_shape(const Field2D& f, const char* where) const;

private:
  double order_;
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> weights_;
  std::vector<double> inv_weights_;
  std::vector<double> sqrt_weights_;
  double mean_inv_weight_ = 1.0;
  std::shared_ptr<const DctPlan> plan_;
};

SobolevOperator make_sobolev(double s, std::size_t rows, std::size_t cols);

/// Sigma_s f: low-pass by D_s.
Field2D apply_sigma(const SobolevOperator& op, const Field2D& f);
/// Sigma_s^-1 f: high-pass by (1+|w|^2)^s.
Field2D apply_sigma_inv(const SobolevOperator& op, const Field2D& f);
/// Sigma_s^(1/2) f; colours white noise into covariance Sigma_s.
Field2D apply_sigma_sqrt(const SobolevOperator& op, const Field2D& f);

/// Bin-wise product of a spectrum with an arbitrary weight table.
Spectrum2D weighted(const Spectrum2D& s, std::span<const double> weights);

/// <f, g>_{H^s} = sum_w (1+|w|^2)^s f^(w) g^(w).
double sobolev_inner(const SobolevOperator& op, const Field2D& f, const Field2D& g);
double sobolev_norm_sq(const SobolevOperator& op, const Field2D& f);

} // namespace sobo
