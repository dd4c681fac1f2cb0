#include "sobolev/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace sobo {

void SynthConfig::validate() const {
  if (!(spectral_slope >= 0.0)) throw ValidationError("SynthConfig: spectral_slope must be >= 0");
  if (rows == 0 || cols == 0) throw ValidationError("SynthConfig: grid must be positive");
  if (count < 1) throw ValidationError("SynthConfig: count must be >= 1");
}

void DegradeConfig::validate(std::size_t rows, std::size_t cols) const {
  if (!(blur_sigma >= 0.0)) throw ValidationError("DegradeConfig: blur_sigma must be >= 0");
  if (!(noise_sigma >= 0.0)) throw ValidationError("DegradeConfig: noise_sigma must be >= 0");
  if (downscale_factor < 1) throw ValidationError("DegradeConfig: downscale_factor must be >= 1");
  if (rows % downscale_factor != 0 || cols % downscale_factor != 0)
    throw ValidationError("DegradeConfig: downscale_factor " + std::to_string(downscale_factor) +
                          " does not divide grid " + std::to_string(rows) + "x" +
                          std::to_string(cols));
}

Field2D make_powerlaw_image(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const SobolevOperator shape(cfg.spectral_slope, cfg.rows, cfg.cols);
  Spectrum2D s = shape.plan().forward(white_field(rng, cfg.rows, cfg.cols));
  s = weighted(s, shape.sqrt_weights());
  s[0] = 0.0;
  Field2D img = shape.plan().inverse(s);
  const double m = mean(img);
  double var = 0.0;
  for (double& v : img.values()) {
    v -= m;
    var += v * v;
  }
  var /= static_cast<double>(img.size());
  if (var > 0.0) img *= 1.0 / std::sqrt(var);
  return img;
}

namespace {

// Half-sample symmetric reflection: -1 -> 0, n -> n - 1.
std::size_t reflect(long i, long n) {
  const long period = 2 * n;
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < n ? m : period - 1 - m);
}

std::vector<double> gaussian_kernel(double sigma) {
  const long radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

double cubic_weight(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

} // namespace

Field2D gaussian_blur(const Field2D& f, double sigma) {
  if (!(sigma >= 0.0)) throw ValidationError("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0) return f;
  const auto k = gaussian_kernel(sigma);
  const long radius = static_cast<long>(k.size() / 2);
  const long rows = static_cast<long>(f.rows()), cols = static_cast<long>(f.cols());
  Field2D tmp(f.rows(), f.cols()), out(f.rows(), f.cols());
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) {
      double s = 0.0;
      for (long j = -radius; j <= radius; ++j)
        s += k[static_cast<std::size_t>(j + radius)] * f(static_cast<std::size_t>(r), reflect(c + j, cols));
      tmp(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = s;
    }
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) {
      double s = 0.0;
      for (long j = -radius; j <= radius; ++j)
        s += k[static_cast<std::size_t>(j + radius)] * tmp(reflect(r + j, rows), static_cast<std::size_t>(c));
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = s;
    }
  return out;
}

Field2D average_pool(const Field2D& f, std::size_t factor) {
  if (factor < 1) throw ValidationError("average_pool: factor must be >= 1");
  if (f.rows() % factor != 0 || f.cols() % factor != 0)
    throw ValidationError("average_pool: factor does not divide grid");
  if (factor == 1) return f;
  Field2D out(f.rows() / factor, f.cols() / factor);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t r = 0; r < f.rows(); ++r)
    for (std::size_t c = 0; c < f.cols(); ++c) out(r / factor, c / factor) += f(r, c) * inv;
  return out;
}

Field2D bilinear_upscale(const Field2D& f, std::size_t factor) {
  if (factor < 1) throw ValidationError("bilinear_upscale: factor must be >= 1");
  if (factor == 1) return f;
  const std::size_t rows = f.rows() * factor, cols = f.cols() * factor;
  Field2D out(rows, cols);
  const double scale = 1.0 / static_cast<double>(factor);
  auto coord = [&](std::size_t dst, std::size_t n, std::size_t& i0, std::size_t& i1, double& w) {
    const double src = std::clamp((static_cast<double>(dst) + 0.5) * scale - 0.5, 0.0,
                                  static_cast<double>(n - 1));
    i0 = static_cast<std::size_t>(std::floor(src));
    i1 = std::min(i0 + 1, n - 1);
    w = src - static_cast<double>(i0);
  };
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t r0, r1;
    double wr;
    coord(r, f.rows(), r0, r1, wr);
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t c0, c1;
      double wc;
      coord(c, f.cols(), c0, c1, wc);
      const double top = (1.0 - wc) * f(r0, c0) + wc * f(r0, c1);
      const double bot = (1.0 - wc) * f(r1, c0) + wc * f(r1, c1);
      out(r, c) = (1.0 - wr) * top + wr * bot;
    }
  }
  return out;
}

Field2D bicubic_resize(const Field2D& f, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw ValidationError("bicubic_resize: target must be positive");
  const double sr = static_cast<double>(f.rows()) / static_cast<double>(rows);
  const double sc = static_cast<double>(f.cols()) / static_cast<double>(cols);
  const long in_r = static_cast<long>(f.rows()), in_c = static_cast<long>(f.cols());
  auto clampi = [](long i, long n) { return static_cast<std::size_t>(std::clamp(i, 0L, n - 1)); };
  Field2D out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double y = (static_cast<double>(r) + 0.5) * sr - 0.5;
    const long y0 = static_cast<long>(std::floor(y));
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = (static_cast<double>(c) + 0.5) * sc - 0.5;
      const long x0 = static_cast<long>(std::floor(x));
      double s = 0.0, wsum = 0.0;
      for (long j = -1; j <= 2; ++j) {
        const double wy = cubic_weight(y - static_cast<double>(y0 + j));
        for (long i = -1; i <= 2; ++i) {
          const double w = wy * cubic_weight(x - static_cast<double>(x0 + i));
          s += w * f(clampi(y0 + j, in_r), clampi(x0 + i, in_c));
          wsum += w;
        }
      }
      out(r, c) = s / wsum;
    }
  }
  return out;
}

Field2D degrade(const Field2D& x, const DegradeConfig& cfg, Rng& rng) {
  cfg.validate(x.rows(), x.cols());
  Field2D low = average_pool(gaussian_blur(x, cfg.blur_sigma), cfg.downscale_factor);
  if (cfg.noise_sigma > 0.0)
    for (double& v : low.values()) v += cfg.noise_sigma * rng.normal();
  return bilinear_upscale(low, cfg.downscale_factor);
}

Field2D artifact_proxy(const Field2D& x, const ArtifactConfig& cfg, Rng& rng) {
  if (cfg.resample_factor < 1 || cfg.quant_levels < 1)
    throw ValidationError("artifact_proxy: bad configuration");
  Field2D y = gaussian_blur(x, cfg.blur_sigma);
  if (cfg.resample_factor > 1) {
    const std::size_t r = std::max<std::size_t>(1, x.rows() / cfg.resample_factor);
    const std::size_t c = std::max<std::size_t>(1, x.cols() / cfg.resample_factor);
    y = bicubic_resize(bicubic_resize(y, r, c), x.rows(), x.cols());
  }
  // High-pass texture, quantised to a few levels so it reads as blocky detail.
  const Field2D white = white_field(rng, x.rows(), x.cols());
  Field2D tex = white - gaussian_blur(white, 1.0);
  const double levels = static_cast<double>(cfg.quant_levels);
  for (double& v : tex.values()) v = std::round(v * levels) / levels;
  return axpy(cfg.texture_amplitude, tex, y);
}

Dataset build_dataset(const SynthConfig& synth, const DegradeConfig& deg) {
  synth.validate();
  deg.validate(synth.rows, synth.cols);
  Dataset ds;
  ds.pairs.reserve(synth.count);
  for (std::size_t i = 0; i < synth.count; ++i) {
    SynthConfig one = synth;
    one.seed = synth.seed + i;
    Field2D hq = make_powerlaw_image(one);
    double peak = 0.0;
    for (double v : hq.values()) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) hq *= 1.0 / peak;
    Rng rng(derive_seed(one.seed, 1));
    Field2D lq = degrade(hq, deg, rng);
    ds.pairs.push_back({std::move(lq), std::move(hq)});
  }
  KeyValues& m = ds.manifest;
  m.set("count", std::to_string(synth.count));
  m.set("rows", std::to_string(synth.rows));
  m.set("cols", std::to_string(synth.cols));
  m.set("seed", std::to_string(synth.seed));
  m.set("image_seeds", std::to_string(synth.seed) + ".." + std::to_string(synth.seed + synth.count - 1));
  m.set("spectral_slope", format_double(synth.spectral_slope));
  m.set("blur_sigma", format_double(deg.blur_sigma));
  m.set("downscale_factor", std::to_string(deg.downscale_factor));
  m.set("noise_sigma", format_double(deg.noise_sigma));
  m.set("normalization", "peak_abs_to_unit");
  return ds;
}

namespace {

std::string pair_name(std::size_t index, const char* kind) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu_%s.fld", index + 1, kind);
  return buf;
}

} // namespace

DataSpec DataSpec::from_key_values(const KeyValues& kv) {
  static const char* const known[] = {"rows", "cols", "count", "seed", "spectral_slope",
                                      "blur_sigma", "downscale_factor", "noise_sigma", "output"};
  for (const auto& [key, value] : kv.entries())
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw ValidationError("data config: unknown key '" + key + "'");
  auto size_of = [&](const char* key, std::size_t fallback) {
    const long long v = kv.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ValidationError(std::string("data config: ") + key + " must be >= 0");
    return static_cast<std::size_t>(v);
  };
  DataSpec d;
  d.synth.rows = size_of("rows", d.synth.rows);
  d.synth.cols = size_of("cols", d.synth.cols);
  d.synth.count = size_of("count", d.synth.count);
  d.synth.seed = kv.get_u64("seed", d.synth.seed);
  d.synth.spectral_slope = kv.get_double("spectral_slope", d.synth.spectral_slope);
  d.degrade.blur_sigma = kv.get_double("blur_sigma", d.degrade.blur_sigma);
  d.degrade.downscale_factor = size_of("downscale_factor", d.degrade.downscale_factor);
  d.degrade.noise_sigma = kv.get_double("noise_sigma", d.degrade.noise_sigma);
  d.output = kv.get_or("output", "");
  d.synth.validate();
  d.degrade.validate(d.synth.rows, d.synth.cols);
  return d;
}

DataSpec DataSpec::load(const std::filesystem::path& path) {
  DataSpec d = from_key_values(KeyValues::load(path));
  if (!d.output.empty() && d.output.is_relative()) d.output = path.parent_path() / d.output;
  return d;
}

void write_archive(const std::filesystem::path& dir, const Dataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create archive directory " + dir.string() + ": " + ec.message());
  KeyValues manifest = ds.manifest;
  manifest.set("count", std::to_string(ds.pairs.size()));
  write_file(dir / "manifest.txt", manifest.serialize());
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    write_field(dir / pair_name(i, "lq"), ds.pairs[i].lq);
    write_field(dir / pair_name(i, "hq"), ds.pairs[i].hq);
  }
}

Dataset load_archive(const std::filesystem::path& dir) {
  Dataset ds;
  ds.manifest = KeyValues::load(dir / "manifest.txt");
  const auto count = ds.manifest.get_int("count", -1);
  if (count < 1) throw ValidationError(dir.string() + ": manifest has no valid count");
  for (long long i = 0; i < count; ++i) {
    DataPair p{read_field(dir / pair_name(static_cast<std::size_t>(i), "lq")),
               read_field(dir / pair_name(static_cast<std::size_t>(i), "hq"))};
    require_same_shape(p.lq, p.hq, "load_archive");
    if (!ds.pairs.empty()) require_same_shape(p.hq, ds.pairs.front().hq, "load_archive");
    ds.pairs.push_back(std::move(p));
  }
  return ds;
}

} // namespace sobo
