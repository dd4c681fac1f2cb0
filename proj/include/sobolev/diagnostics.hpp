#pragma once

#include "sobolev/spectral.hpp"

#include <limits>
#include <string>
#include <vector>

namespace sobo {

/// dB-RMS distance between the DCT power spectra of a and b over every
/// non-DC bin. Powers are floored at 1e-12 before the log.
double log_spectral_distance(const Field2D& a, const Field2D& b);

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE); kPsnrIdentical when a == b.
double psnr(const Field2D& a, const Field2D& b, double peak);

struct ProfileRow {
  std::size_t bin = 0;      // floor(|w|)
  double l2_energy = 0.0;   // sum of squared coefficients
  double hs_energy = 0.0;   // sum of (1 + |w|^2)^s squared coefficients
};

/// Per-radial-bin residual energy, unweighted and H^s-weighted. Every bin up
/// to the grid diagonal is listed, including empty ones.
std::vector<ProfileRow> residual_spectrum_profile(const Field2D& gamma, const SobolevOperator& op);

/// "bin,l2_energy,hs_energy" header then one row per bin.
std::string profile_to_csv(const std::vector<ProfileRow>& rows);

} // namespace sobo
