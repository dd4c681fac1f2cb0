#pragma once

#include "sobolev/noise.hpp"

#include <cmath>
#include <filesystem>
#include <string>

namespace sobo::testing {

inline Field2D random_field(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  Rng rng(seed);
  return white_field(rng, rows, cols);
}

inline double max_abs_diff(const Field2D& a, const Field2D& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Field whose DCT spectrum is a single unit coefficient at (kx, ky).
inline Field2D single_mode(std::size_t rows, std::size_t cols, std::size_t kx, std::size_t ky,
                           double amplitude = 1.0) {
  Spectrum2D s(rows, cols);
  s(kx, ky) = amplitude;
  return dct2_inverse(s);
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("sobolev_test_" + tag);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

private:
  std::filesystem::path path_;
};

} // namespace sobo::testing
