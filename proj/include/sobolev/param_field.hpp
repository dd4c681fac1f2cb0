#pragma once

#include "sobolev/field.hpp"
#include "sobolev/flow.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sobo {

/// Architecture of the toy velocity network.
///
///   z   = [x_t (n) | cond (n) | e(t) (4)],  e(t) = (sin pi t, cos pi t, sin 2pi t, cos 2pi t)
///   h1  = tanh(W1 z + b1)
///   h2  = tanh(W2 h1 + b2)
///   out = W3 h2 + b3 + skip
///
/// With `spectral_skip`, skip = g IDCT( sum_k phi_k(t) (A_k . DCT(x_t) + B_k . DCT(cond)) )
/// where phi = (1, e(t)), A_k, B_k are per-bin tables and g = kSkipGain. The
/// skip lets the network pass x_t through at full rank, which the hidden
/// bottleneck cannot. The fixed gain g acts as a learning-rate multiplier for
/// the tables, whose useful values are O(1) rather than O(1/sqrt(fan-in)).
struct NetShape {
  std::size_t rows = 16;
  std::size_t cols = 16;
  std::size_t hidden = 64;
  bool spectral_skip = true;

  std::size_t cells() const noexcept { return rows * cols; }
  std::size_t input_dim() const noexcept { return 2 * cells() + kTimeEmbedding; }
  std::size_t param_count() const noexcept;

  static constexpr std::size_t kTimeEmbedding = 4;
  static constexpr std::size_t kSkipBasis = 1 + kTimeEmbedding;
  static constexpr double kSkipGain = 4.0;

  friend bool operator==(const NetShape&, const NetShape&) = default;
};

/// Offsets of each parameter block inside the flat parameter vector.
struct ParamLayout {
  std::size_t w1, b1, w2, b2, w3, b3, skip_x, skip_c, end;
  explicit ParamLayout(const NetShape& s);
};

/// Flat parameter vector of the velocity network. Every mutation and every
/// copy takes a fresh stamp so cached activations can detect staleness.
class FieldParams {
public:
  FieldParams(NetShape shape, std::vector<double> values);
  FieldParams(const FieldParams& o);
  FieldParams& operator=(const FieldParams& o);
  FieldParams(FieldParams&&) noexcept = default;
  FieldParams& operator=(FieldParams&&) noexcept = default;

  /// All zeros: the network outputs the zero field.
  static FieldParams zeros(const NetShape& shape);
  /// Scaled-normal hidden layers; final layer and skip tables start at zero.
  static FieldParams init(const NetShape& shape, std::uint64_t seed);

  const NetShape& shape() const noexcept { return shape_; }
  std::size_t param_count() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  /// Writable view; bumps the stamp.
  std::span<double> mutable_values();
  std::uint64_t stamp() const noexcept { return stamp_; }

  std::vector<double> zero_grad() const { return std::vector<double>(values_.size(), 0.0); }

  friend bool operator==(const FieldParams& a, const FieldParams& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

private:
  NetShape shape_;
  std::vector<double> values_;
  std::uint64_t stamp_;
};

/// Activations saved by forward() for a later backward().
struct ForwardCache {
  std::uint64_t stamp = 0;
  double t = 0.0;
  std::vector<double> input;  // z
  std::vector<double> h1, h2; // post-activation
  Spectrum2D x_hat, c_hat;    // only with spectral skip
};

std::array<double, NetShape::kTimeEmbedding> time_embedding(double t);

Field2D forward(const FieldParams& p, const Field2D& xt, const Field2D& cond, double t,
                ForwardCache* cache = nullptr);

/// Reverse-mode pass for the scalar <upstream, forward(...)>. Parameter
/// gradients are added into `param_grad` (size param_count); the returned
/// field is the gradient with respect to x_t. Throws StaleCacheError if the
/// parameters changed since the cached forward.
Field2D backward(const FieldParams& p, const ForwardCache& cache, const Field2D& upstream,
                 std::span<double> param_grad);

/// Wraps a parameter set as a VelocityFn. The parameters must outlive it.
VelocityFn as_velocity(const FieldParams& p);

struct GradCheckReport {
  double max_relative_error = 0.0;
  int probe_count = 0;
  double epsilon = 0.0;
};

/// Central-difference check of an analytic gradient along `probes` random
/// unit directions. Per-probe error is |fd - an| / max(|fd|, |an|, 1e-8).
GradCheckReport check_param_gradient(const std::function<double(const FieldParams&)>& loss,
                                     const FieldParams& at, std::span<const double> analytic,
                                     int probes, double epsilon, std::uint64_t seed);

GradCheckReport check_field_gradient(const std::function<double(const Field2D&)>& loss,
                                     const Field2D& at, const Field2D& analytic, int probes,
                                     double epsilon, std::uint64_t seed);

// Optimisers.

void sgd_update(std::span<double> params, std::span<const double> grads, double lr);
void sgd_step(FieldParams& p, std::span<const double> grads, double lr);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0; // decoupled (AdamW)
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 const AdamConfig& cfg);
void adam_step(FieldParams& p, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg);

// Serialisation: 16-byte "SOBPRM01" magic, uint64 rows, cols, hidden,
// spectral_skip (0/1), param_count, then float64 values, little-endian.
std::string encode_params(const FieldParams& p);
FieldParams decode_params(std::string_view bytes);
void write_params(const std::filesystem::path& path, const FieldParams& p);
FieldParams read_params(const std::filesystem::path& path);

} // namespace sobo
