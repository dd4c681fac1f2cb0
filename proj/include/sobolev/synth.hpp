#pragma once

#include "sobolev/io.hpp"
#include "sobolev/noise.hpp"

#include <filesystem>
#include <vector>

namespace sobo {

struct SynthConfig {
  double spectral_slope = 1.2; // alpha: mean power at w is (1 + |w|^2)^-alpha
  std::size_t rows = 32;
  std::size_t cols = 32;
  std::size_t count = 100;
  std::uint64_t seed = 42;

  void validate() const;
};

struct DegradeConfig {
  double blur_sigma = 1.0;
  std::size_t downscale_factor = 4;
  double noise_sigma = 0.02;

  void validate(std::size_t rows, std::size_t cols) const;
};

/// Zero-mean, unit-variance Gaussian image with power-law spectrum, drawn
/// from cfg.seed.
Field2D make_powerlaw_image(const SynthConfig& cfg);

/// Separable Gaussian blur truncated at ceil(3 sigma), half-sample symmetric
/// padding. sigma == 0 returns the input.
Field2D gaussian_blur(const Field2D& f, double sigma);

/// Mean over non-overlapping factor x factor blocks.
Field2D average_pool(const Field2D& f, std::size_t factor);

/// Bilinear resize by an integer factor, pixel-centre aligned, edge clamped.
Field2D bilinear_upscale(const Field2D& f, std::size_t factor);

/// Bicubic (Keys, a = -0.5) resize to an arbitrary shape, pixel-centre aligned.
Field2D bicubic_resize(const Field2D& f, std::size_t rows, std::size_t cols);

/// blur -> average-pool -> additive white noise -> bilinear upscale to the
/// input grid. `rng` supplies the noise and is untouched when noise_sigma == 0.
Field2D degrade(const Field2D& x, const DegradeConfig& cfg, Rng& rng);

struct ArtifactConfig {
  double blur_sigma = 1.0;
  std::size_t resample_factor = 2;
  int quant_levels = 4;
  double texture_amplitude = 0.15;
};

/// Synthetic restoration failure used as a static loser: blur, bicubic
/// down/up resampling, and injected quantised high-frequency texture.
Field2D artifact_proxy(const Field2D& x, const ArtifactConfig& cfg, Rng& rng);

struct DataPair {
  Field2D lq; // condition c
  Field2D hq; // ground truth x1, scaled into [-1, 1]
};

struct Dataset {
  std::vector<DataPair> pairs;
  KeyValues manifest;
};

/// Image i uses seed + i; its degradation noise uses derive_seed(seed + i, 1).
Dataset build_dataset(const SynthConfig& synth, const DegradeConfig& deg);

/// gen-data configuration: rows, cols, count, seed, spectral_slope,
/// blur_sigma, downscale_factor, noise_sigma, output. Unknown keys are rejected.
struct DataSpec {
  SynthConfig synth;
  DegradeConfig degrade;
  std::filesystem::path output;

  static DataSpec from_key_values(const KeyValues& kv);
  static DataSpec load(const std::filesystem::path& path);
};

/// Directory with manifest.txt plus 000001_lq.fld / 000001_hq.fld ... files.
void write_archive(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_archive(const std::filesystem::path& dir);

} // namespace sobo
