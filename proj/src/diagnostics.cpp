#include "sobolev/diagnostics.hpp"

#include "sobolev/io.hpp"

#include <algorithm>
#include <cmath>

namespace sobo {

double log_spectral_distance(const Field2D& a, const Field2D& b) {
  require_same_shape(a, b, "log_spectral_distance");
  if (a.size() < 2) throw ValidationError("log_spectral_distance: need at least one non-DC bin");
  const Spectrum2D sa = dct2_forward(a);
  const Spectrum2D sb = dct2_forward(b);
  constexpr double floor = 1e-12;
  double acc = 0.0;
  for (std::size_t i = 1; i < sa.size(); ++i) {
    const double pa = std::max(sa[i] * sa[i], floor);
    const double pb = std::max(sb[i] * sb[i], floor);
    const double d = 10.0 * std::log10(pa) - 10.0 * std::log10(pb);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(sa.size() - 1));
}

double psnr(const Field2D& a, const Field2D& b, double peak) {
  require_same_shape(a, b, "psnr");
  if (!(peak > 0.0) || !std::isfinite(peak)) throw ValidationError("psnr: peak must be positive");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / mse);
}

std::vector<ProfileRow> residual_spectrum_profile(const Field2D& gamma,
                                                  const SobolevOperator& op) {
  op.require_shape(gamma, "residual_spectrum_profile");
  require_finite(gamma, "residual_spectrum_profile");
  const Spectrum2D s = op.plan().forward(gamma);
  const auto inv = op.inv_weights();
  const std::size_t rows = gamma.rows(), cols = gamma.cols();
  const double top = std::sqrt(static_cast<double>((rows - 1) * (rows - 1) + (cols - 1) * (cols - 1)));
  const auto nbins = static_cast<std::size_t>(std::floor(top)) + 1;
  std::vector<ProfileRow> out(nbins);
  for (std::size_t b = 0; b < nbins; ++b) out[b].bin = b;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const FreqIndex w = freq_index(s, i);
    const auto b = static_cast<std::size_t>(std::floor(w.norm()));
    const double e = s[i] * s[i];
    out[b].l2_energy += e;
    out[b].hs_energy += inv[i] * e;
  }
  return out;
}

std::string profile_to_csv(const std::vector<ProfileRow>& rows) {
  std::string out = "bin,l2_energy,hs_energy\n";
  for (const auto& r : rows) {
    out += std::to_string(r.bin);
    out += ',';
    out += format_double(r.l2_energy);
    out += ',';
    out += format_double(r.hs_energy);
    out += '\n';
  }
  return out;
}

} // namespace sobo
