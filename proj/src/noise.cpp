#include "sobolev/noise.hpp"

#include "sobolev/io.hpp"

#include <cmath>
#include <numbers>

namespace sobo {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t state = seed + stream * 0x9E3779B97F4A7C15ull;
  return splitmix64(state);
}

namespace {
constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
} // namespace

Rng::Rng(std::uint64_t seed) noexcept {
  std::uint64_t sm = seed;
  for (auto& w : s_) w = splitmix64(sm);
}

std::uint64_t Rng::next() noexcept {
  ++draws_;
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() noexcept {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return z;
  }
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  // Lemire's multiply-shift; the bias is < n / 2^64, negligible at our sizes.
  __extension__ using u128 = unsigned __int128;
  return static_cast<std::uint64_t>((static_cast<u128>(next()) * n) >> 64);
}

Field2D white_field(Rng& rng, std::size_t rows, std::size_t cols) {
  Field2D f(rows, cols);
  for (double& v : f.values()) v = rng.normal();
  return f;
}

NoiseSampler::NoiseSampler(std::uint64_t seed, std::size_t rows, std::size_t cols)
    : seed_(seed), rows_(rows), cols_(cols), rng_(seed) {
  if (rows == 0 || cols == 0) throw ValidationError("NoiseSampler: dimensions must be positive");
}

NoiseSampler::NoiseSampler(std::uint64_t seed, std::shared_ptr<const SobolevOperator> op)
    : seed_(seed), rows_(op ? op->rows() : 0), cols_(op ? op->cols() : 0), op_(std::move(op)),
      rng_(seed) {
  if (!op_) throw ValidationError("NoiseSampler: null operator");
}

Field2D NoiseSampler::sample_white() { return white_field(rng_, rows_, cols_); }

Field2D NoiseSampler::sample_colored() {
  if (!op_) throw ValidationError("sample_colored: sampler has no Sobolev operator attached");
  return apply_sigma_sqrt(*op_, sample_white());
}

PsdAccumulator::PsdAccumulator(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), power_sum_(rows * cols, 0.0) {
  if (rows == 0 || cols == 0) throw ValidationError("PsdAccumulator: dimensions must be positive");
}

void PsdAccumulator::add(const Field2D& f) {
  if (f.rows() != rows_ || f.cols() != cols_)
    throw ValidationError("estimate_psd: fields must share one shape");
  add_spectrum(dct2_forward(f));
}

void PsdAccumulator::add_spectrum(const Spectrum2D& s) {
  if (s.rows() != rows_ || s.cols() != cols_)
    throw ValidationError("estimate_psd: spectra must share one shape");
  for (std::size_t i = 0; i < s.size(); ++i) power_sum_[i] += s[i] * s[i];
  ++count_;
}

PsdEstimate PsdAccumulator::finish() const {
  if (count_ == 0) throw ValidationError("estimate_psd: empty ensemble");
  const double diag = std::sqrt(static_cast<double>(rows_ * rows_ + cols_ * cols_));
  const auto nbins = static_cast<std::size_t>(std::ceil(diag));
  std::vector<double> radius_sum(nbins, 0.0), power(nbins, 0.0);
  std::vector<std::size_t> members(nbins, 0);
  for (std::size_t kx = 0; kx < rows_; ++kx) {
    for (std::size_t ky = 0; ky < cols_; ++ky) {
      const double r = std::sqrt(static_cast<double>(kx * kx + ky * ky));
      const auto b = static_cast<std::size_t>(std::floor(r));
      radius_sum[b] += r;
      power[b] += power_sum_[kx * cols_ + ky] / static_cast<double>(count_);
      ++members[b];
    }
  }
  PsdEstimate est;
  est.sample_count = count_;
  for (std::size_t b = 0; b < nbins; ++b) {
    if (members[b] == 0) continue;
    const auto m = static_cast<double>(members[b]);
    est.radial_bins.push_back({radius_sum[b] / m, power[b] / m, members[b]});
  }
  return est;
}

PsdEstimate estimate_psd(std::span<const Field2D> fields) {
  if (fields.empty()) throw ValidationError("estimate_psd: empty ensemble");
  PsdAccumulator acc(fields.front().rows(), fields.front().cols());
  for (const auto& f : fields) acc.add(f);
  return acc.finish();
}

double psd_slope(const PsdEstimate& psd) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (const auto& bin : psd.radial_bins) {
    if (bin.radius < 1.0 || !(bin.power > 0.0)) continue;
    const double x = std::log(1.0 + bin.radius * bin.radius);
    const double y = std::log(bin.power);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw ValidationError("psd_slope: need at least two non-DC bins with power");
  const double nn = static_cast<double>(n);
  const double denom = nn * sxx - sx * sx;
  return (nn * sxy - sx * sy) / denom;
}

std::string psd_to_csv(const PsdEstimate& psd) {
  std::string out = "radius,power\n";
  for (const auto& bin : psd.radial_bins)
    out += format_double(bin.radius) + "," + format_double(bin.power) + "\n";
  return out;
}

} // namespace sobo
