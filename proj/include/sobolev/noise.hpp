#pragma once

#include "sobolev/spectral.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sobo {

/// SplitMix64 step: state += 0x9E3779B97F4A7C15, then the Stafford-13
/// finalizer (shifts 30/27/31, multipliers 0xBF58476D1CE4E5B9,
/// 0x94D049BB133111EB).
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Seed for an independent stream `stream` derived from `seed`: one SplitMix64
/// step from seed + (stream + 1) * 0x9E3779B97F4A7C15.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// xoshiro256** (Blackman & Vigna): state seeded by four SplitMix64 outputs.
/// Uniforms are (next() >> 11) * 2^-53 in [0, 1). Normals come from
/// Box-Muller with u1 = 1 - uniform() in (0, 1]; both outputs are used in
/// order (cos branch first, then sin branch).
class Rng {
public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next() noexcept;
  double uniform() noexcept;
  double normal() noexcept;

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Number of 64-bit words drawn so far.
  std::uint64_t draws() const noexcept { return draws_; }

private:
  std::array<std::uint64_t, 4> s_{};
  std::optional<double> spare_;
  std::uint64_t draws_ = 0;
};

Field2D white_field(Rng& rng, std::size_t rows, std::size_t cols);

/// Seeded source of white and Sobolev-coloured Gaussian fields. One caller per
/// sampler; create one sampler per thread.
class NoiseSampler {
public:
  NoiseSampler(std::uint64_t seed, std::size_t rows, std::size_t cols);
  NoiseSampler(std::uint64_t seed, std::shared_ptr<const SobolevOperator> op);

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  const SobolevOperator* op() const noexcept { return op_.get(); }
  Rng& rng() noexcept { return rng_; }

  Field2D sample_white();
  /// Sigma_s^(1/2) applied to the next white field. Throws if no operator.
  Field2D sample_colored();

private:
  std::uint64_t seed_;
  std::size_t rows_;
  std::size_t cols_;
  std::shared_ptr<const SobolevOperator> op_;
  Rng rng_;
};

struct RadialBin {
  double radius; // mean |w| of member bins
  double power;  // mean squared coefficient over member bins and fields
  std::size_t members;
};

/// Radially averaged power spectrum; bins of width 1 in |w|, empty bins
/// dropped, ordered by radius. Bin 0 holds only the DC coefficient.
struct PsdEstimate {
  std::vector<RadialBin> radial_bins;
  std::size_t sample_count = 0;
};

PsdEstimate estimate_psd(std::span<const Field2D> fields);

/// Accumulates an ensemble one field at a time (same result as estimate_psd).
class PsdAccumulator {
public:
  PsdAccumulator(std::size_t rows, std::size_t cols);
  void add(const Field2D& f);
  void add_spectrum(const Spectrum2D& s);
  std::size_t count() const noexcept { return count_; }
  PsdEstimate finish() const;

private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> power_sum_;
  std::size_t count_ = 0;
};

/// OLS slope of log(power) against log(1 + radius^2), DC bin and zero-power
/// bins excluded. Throws if fewer than two bins remain.
double psd_slope(const PsdEstimate& psd);

/// "radius,power" header then one row per bin, 17 significant digits.
std::string psd_to_csv(const PsdEstimate& psd);

} // namespace sobo
