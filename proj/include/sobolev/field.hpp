#pragma once

#include "sobolev/errors.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sobo {

struct SpatialTag {};
struct SpectralTag {};

/// Row-major H x W grid of doubles. The tag keeps spatial fields and DCT
/// coefficient grids from being mixed up at call sites.
template <class Tag>
class BasicGrid {
public:
  BasicGrid() = default;

  BasicGrid(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(checked_size(rows, cols), fill) {}

  BasicGrid(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != checked_size(rows, cols))
      throw ValidationError("grid value count does not match " + std::to_string(rows) + "x" +
                            std::to_string(cols));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& data() const noexcept { return values_; }

  bool same_shape(const BasicGrid& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool all_finite() const noexcept {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  BasicGrid& operator+=(const BasicGrid& o) {
    require_same_shape(*this, o, "operator+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  BasicGrid& operator-=(const BasicGrid& o) {
    require_same_shape(*this, o, "operator-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  BasicGrid& operator*=(double a) noexcept {
    for (double& v : values_) v *= a;
    return *this;
  }

  friend BasicGrid operator+(BasicGrid a, const BasicGrid& b) { return a += b; }
  friend BasicGrid operator-(BasicGrid a, const BasicGrid& b) { return a -= b; }
  friend BasicGrid operator*(BasicGrid a, double s) { return a *= s; }
  friend BasicGrid operator*(double s, BasicGrid a) { return a *= s; }
  friend BasicGrid operator-(BasicGrid a) { return a *= -1.0; }

  friend bool operator==(const BasicGrid&, const BasicGrid&) = default;

  friend void require_same_shape(const BasicGrid& a, const BasicGrid& b, const char* where) {
    if (!a.same_shape(b))
      throw ValidationError(std::string(where) + ": shape mismatch " + std::to_string(a.rows_) +
                            "x" + std::to_string(a.cols_) + " vs " + std::to_string(b.rows_) +
                            "x" + std::to_string(b.cols_));
  }

private:
  static std::size_t checked_size(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) throw ValidationError("grid dimensions must be positive");
    return rows * cols;
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

using Field2D = BasicGrid<SpatialTag>;
using Spectrum2D = BasicGrid<SpectralTag>;

/// Throws ValidationError naming `where` if any value is NaN or infinite.
template <class Tag>
void require_finite(const BasicGrid<Tag>& g, const char* where) {
  if (!g.all_finite()) throw ValidationError(std::string(where) + ": non-finite value in grid");
}

/// Plain L2 inner product sum_i a_i b_i.
template <class Tag>
double dot(const BasicGrid<Tag>& a, const BasicGrid<Tag>& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <class Tag>
double squared_norm(const BasicGrid<Tag>& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return s;
}

inline double mean(const Field2D& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s / static_cast<double>(f.size());
}

/// a*x + y, elementwise.
inline Field2D axpy(double a, const Field2D& x, const Field2D& y) {
  require_same_shape(x, y, "axpy");
  Field2D out = y;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * x[i];
  return out;
}

/// Integer frequency index of a spectral bin; row index is k_x, column k_y.
struct FreqIndex {
  std::size_t kx;
  std::size_t ky;

  double norm_sq() const noexcept {
    return static_cast<double>(kx * kx + ky * ky);
  }
  double norm() const noexcept { return std::sqrt(norm_sq()); }
};

inline FreqIndex freq_index(const Spectrum2D& s, std::size_t flat) {
  return {flat / s.cols(), flat % s.cols()};
}

} // namespace sobo
