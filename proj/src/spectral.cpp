#include "sobolev/spectral.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <numbers>

namespace sobo {

namespace {

std::vector<double> dct_basis(std::size_t n) {
  std::vector<double> c(n * n);
  const double a0 = std::sqrt(1.0 / static_cast<double>(n));
  const double ak = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const double a = k == 0 ? a0 : ak;
    for (std::size_t j = 0; j < n; ++j)
      c[k * n + j] = a * std::cos(std::numbers::pi * static_cast<double>((2 * j + 1) * k) /
                                  (2.0 * static_cast<double>(n)));
  }
  return c;
}

// out = A * X for A (n x n), X (n x m), all row-major.
void left_mul(const std::vector<double>& a, std::span<const double> x, std::span<double> out,
              std::size_t n, std::size_t m, bool transpose_a) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out.data() + i * m;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = transpose_a ? a[k * n + i] : a[i * n + k];
      const double* xrow = x.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aik * xrow[j];
    }
  }
}

// out = X * B^T (or X * B) for X (n x m), B (m x m).
void right_mul(std::span<const double> x, const std::vector<double>& b, std::span<double> out,
               std::size_t n, std::size_t m, bool transpose_b) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* xrow = x.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      if (transpose_b) {
        const double* brow = b.data() + j * m;
        for (std::size_t k = 0; k < m; ++k) s += xrow[k] * brow[k];
      } else {
        for (std::size_t k = 0; k < m; ++k) s += xrow[k] * b[k * m + j];
      }
      out[i * m + j] = s;
    }
  }
}

} // namespace

DctPlan::DctPlan(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_basis_(dct_basis(rows)), col_basis_(dct_basis(cols)) {
  if (rows == 0 || cols == 0) throw ValidationError("DctPlan: dimensions must be positive");
}

Spectrum2D DctPlan::forward(const Field2D& f) const {
  if (f.rows() != rows_ || f.cols() != cols_)
    throw ValidationError("dct2_forward: field shape does not match plan");
  std::vector<double> tmp(f.size());
  left_mul(row_basis_, f.values(), tmp, rows_, cols_, false);
  Spectrum2D out(rows_, cols_);
  right_mul(tmp, col_basis_, out.values(), rows_, cols_, true);
  return out;
}

Field2D DctPlan::inverse(const Spectrum2D& s) const {
  if (s.rows() != rows_ || s.cols() != cols_)
    throw ValidationError("dct2_inverse: spectrum shape does not match plan");
  std::vector<double> tmp(s.size());
  left_mul(row_basis_, s.values(), tmp, rows_, cols_, true);
  Field2D out(rows_, cols_);
  right_mul(tmp, col_basis_, out.values(), rows_, cols_, false);
  return out;
}

std::shared_ptr<const DctPlan> dct_plan(std::size_t rows, std::size_t cols) {
  static std::mutex mu;
  static std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const DctPlan>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{rows, cols}];
  if (!slot) slot = std::make_shared<const DctPlan>(rows, cols);
  return slot;
}

Spectrum2D dct2_forward(const Field2D& f) {
  require_finite(f, "dct2_forward");
  return dct_plan(f.rows(), f.cols())->forward(f);
}

Field2D dct2_inverse(const Spectrum2D& s) {
  require_finite(s, "dct2_inverse");
  return dct_plan(s.rows(), s.cols())->inverse(s);
}

SobolevOperator::SobolevOperator(double order, std::size_t rows, std::size_t cols)
    : order_(order), rows_(rows), cols_(cols) {
  if (!(order >= 0.0) || !std::isfinite(order))
    throw ValidationError("Sobolev order must be finite and >= 0, got " + std::to_string(order));
  if (rows == 0 || cols == 0) throw ValidationError("Sobolev operator: dimensions must be positive");
  const std::size_t n = rows * cols;
  weights_.resize(n);
  inv_weights_.resize(n);
  sqrt_weights_.resize(n);
  for (std::size_t kx = 0; kx < rows; ++kx) {
    for (std::size_t ky = 0; ky < cols; ++ky) {
      const double base = 1.0 + static_cast<double>(kx * kx + ky * ky);
      const std::size_t i = kx * cols + ky;
      weights_[i] = std::pow(base, -order);
      inv_weights_[i] = std::pow(base, order);
      sqrt_weights_[i] = std::pow(base, -0.5 * order);
    }
  }
  double sum = 0.0;
  for (double w : inv_weights_) sum += w;
  mean_inv_weight_ = sum / static_cast<double>(n);
  plan_ = dct_plan(rows, cols);
}

void SobolevOperator::require_shape(const Field2D& f, const char* where) const {
  if (f.rows() != rows_ || f.cols() != cols_)
    throw ValidationError(std::string(where) + ": field " + std::to_string(f.rows()) + "x" +
                          std::to_string(f.cols()) + " does not match operator " +
                          std::to_string(rows_) + "x" + std::to_string(cols_));
}

SobolevOperator make_sobolev(double s, std::size_t rows, std::size_t cols) {
  return SobolevOperator(s, rows, cols);
}

Spectrum2D weighted(const Spectrum2D& s, std::span<const double> weights) {
  if (weights.size() != s.size()) throw ValidationError("weighted: table size mismatch");
  Spectrum2D out = s;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= weights[i];
  return out;
}

namespace {

Field2D apply_table(const SobolevOperator& op, const Field2D& f, std::span<const double> table,
                    const char* where) {
  op.require_shape(f, where);
  require_finite(f, where);
  if (op.is_identity()) return f;
  return op.plan().inverse(weighted(op.plan().forward(f), table));
}

} // namespace

Field2D apply_sigma(const SobolevOperator& op, const Field2D& f) {
  return apply_table(op, f, op.weights(), "apply_sigma");
}

Field2D apply_sigma_inv(const SobolevOperator& op, const Field2D& f) {
  return apply_table(op, f, op.inv_weights(), "apply_sigma_inv");
}

Field2D apply_sigma_sqrt(const SobolevOperator& op, const Field2D& f) {
  return apply_table(op, f, op.sqrt_weights(), "apply_sigma_sqrt");
}

double sobolev_inner(const SobolevOperator& op, const Field2D& f, const Field2D& g) {
  op.require_shape(f, "sobolev_inner");
  op.require_shape(g, "sobolev_inner");
  require_finite(f, "sobolev_inner");
  require_finite(g, "sobolev_inner");
  if (op.is_identity()) return dot(f, g);
  const Spectrum2D fs = op.plan().forward(f);
  const Spectrum2D gs = op.plan().forward(g);
  const auto w = op.inv_weights();
  double s = 0.0;
  for (std::size_t i = 0; i < fs.size(); ++i) s += w[i] * fs[i] * gs[i];
  return s;
}

double sobolev_norm_sq(const SobolevOperator& op, const Field2D& f) {
  op.require_shape(f, "sobolev_norm_sq");
  require_finite(f, "sobolev_norm_sq");
  if (op.is_identity()) return squared_norm(f);
  const Spectrum2D fs = op.plan().forward(f);
  const auto w = op.inv_weights();
  double s = 0.0;
  for (std::size_t i = 0; i < fs.size(); ++i) s += w[i] * fs[i] * fs[i];
  return s;
}

} // namespace sobo
