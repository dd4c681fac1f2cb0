#include "sobolev/param_field.hpp"

#include "sobolev/io.hpp"
#include "sobolev/noise.hpp"
#include "sobolev/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

namespace sobo {

namespace {

std::uint64_t next_stamp() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

double tanh_prime_from_output(double h) { return 1.0 - h * h; }

} // namespace

std::size_t NetShape::param_count() const noexcept { return ParamLayout(*this).end; }

ParamLayout::ParamLayout(const NetShape& s) {
  const std::size_t in = s.input_dim(), h = s.hidden, n = s.cells();
  w1 = 0;
  b1 = w1 + h * in;
  w2 = b1 + h;
  b2 = w2 + h * h;
  w3 = b2 + h;
  b3 = w3 + n * h;
  skip_x = b3 + n;
  const std::size_t skip = s.spectral_skip ? NetShape::kSkipBasis * n : 0;
  skip_c = skip_x + skip;
  end = skip_c + skip;
}

FieldParams::FieldParams(NetShape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)), stamp_(next_stamp()) {
  if (shape_.rows == 0 || shape_.cols == 0 || shape_.hidden == 0)
    throw ValidationError("FieldParams: shape dimensions must be positive");
  if (values_.size() != shape_.param_count())
    throw ValidationError("FieldParams: expected " + std::to_string(shape_.param_count()) +
                          " parameters, got " + std::to_string(values_.size()));
  for (double v : values_)
    if (!std::isfinite(v)) throw ValidationError("FieldParams: non-finite parameter");
}

FieldParams::FieldParams(const FieldParams& o)
    : shape_(o.shape_), values_(o.values_), stamp_(next_stamp()) {}

FieldParams& FieldParams::operator=(const FieldParams& o) {
  shape_ = o.shape_;
  values_ = o.values_;
  stamp_ = next_stamp();
  return *this;
}

FieldParams FieldParams::zeros(const NetShape& shape) {
  return FieldParams(shape, std::vector<double>(shape.param_count(), 0.0));
}

FieldParams FieldParams::init(const NetShape& shape, std::uint64_t seed) {
  FieldParams p = zeros(shape);
  const ParamLayout lay(shape);
  Rng rng(seed);
  auto v = p.mutable_values();
  const double s1 = 1.0 / std::sqrt(static_cast<double>(shape.input_dim()));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
  for (std::size_t i = lay.w1; i < lay.b1; ++i) v[i] = s1 * rng.normal();
  for (std::size_t i = lay.w2; i < lay.b2; ++i) v[i] = s2 * rng.normal();
  return p;
}

std::span<double> FieldParams::mutable_values() {
  stamp_ = next_stamp();
  return values_;
}

std::array<double, NetShape::kTimeEmbedding> time_embedding(double t) {
  const double a = std::numbers::pi * t;
  return {std::sin(a), std::cos(a), std::sin(2.0 * a), std::cos(2.0 * a)};
}

namespace {

std::array<double, NetShape::kSkipBasis> skip_basis(double t) {
  const auto e = time_embedding(t);
  return {1.0, e[0], e[1], e[2], e[3]};
}

void require_grid(const NetShape& s, const Field2D& f, const char* where) {
  if (f.rows() != s.rows || f.cols() != s.cols)
    throw ValidationError(std::string(where) + ": field " + std::to_string(f.rows()) + "x" +
                          std::to_string(f.cols()) + " does not match network grid " +
                          std::to_string(s.rows) + "x" + std::to_string(s.cols));
}

} // namespace

Field2D forward(const FieldParams& p, const Field2D& xt, const Field2D& cond, double t,
                ForwardCache* cache) {
  const NetShape& s = p.shape();
  require_grid(s, xt, "forward");
  require_grid(s, cond, "forward");
  const ParamLayout lay(s);
  const auto w = p.values();
  const std::size_t n = s.cells(), in = s.input_dim(), h = s.hidden;

  std::vector<double> z(in);
  std::copy(xt.values().begin(), xt.values().end(), z.begin());
  std::copy(cond.values().begin(), cond.values().end(), z.begin() + static_cast<long>(n));
  const auto emb = time_embedding(t);
  std::copy(emb.begin(), emb.end(), z.begin() + static_cast<long>(2 * n));

  std::vector<double> h1(h), h2(h);
  for (std::size_t j = 0; j < h; ++j) {
    const double* row = w.data() + lay.w1 + j * in;
    double a = w[lay.b1 + j];
    for (std::size_t k = 0; k < in; ++k) a += row[k] * z[k];
    h1[j] = std::tanh(a);
  }
  for (std::size_t j = 0; j < h; ++j) {
    const double* row = w.data() + lay.w2 + j * h;
    double a = w[lay.b2 + j];
    for (std::size_t k = 0; k < h; ++k) a += row[k] * h1[k];
    h2[j] = std::tanh(a);
  }
  Field2D out(s.rows, s.cols);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = w.data() + lay.w3 + i * h;
    double a = w[lay.b3 + i];
    for (std::size_t k = 0; k < h; ++k) a += row[k] * h2[k];
    out[i] = a;
  }

  Spectrum2D x_hat, c_hat;
  if (s.spectral_skip) {
    const auto& plan = *dct_plan(s.rows, s.cols);
    x_hat = plan.forward(xt);
    c_hat = plan.forward(cond);
    const auto phi = skip_basis(t);
    Spectrum2D mix(s.rows, s.cols);
    for (std::size_t k = 0; k < NetShape::kSkipBasis; ++k) {
      const double* ax = w.data() + lay.skip_x + k * n;
      const double* bc = w.data() + lay.skip_c + k * n;
      const double g = NetShape::kSkipGain * phi[k];
      for (std::size_t i = 0; i < n; ++i) mix[i] += g * (ax[i] * x_hat[i] + bc[i] * c_hat[i]);
    }
    out += plan.inverse(mix);
  }

  if (cache) {
    cache->stamp = p.stamp();
    cache->t = t;
    cache->input = std::move(z);
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
    cache->x_hat = std::move(x_hat);
    cache->c_hat = std::move(c_hat);
  }
  return out;
}

Field2D backward(const FieldParams& p, const ForwardCache& cache, const Field2D& upstream,
                 std::span<double> param_grad) {
  if (cache.stamp != p.stamp() || cache.input.empty())
    throw StaleCacheError("backward: activation cache does not belong to these parameters");
  const NetShape& s = p.shape();
  require_grid(s, upstream, "backward");
  if (param_grad.size() != p.param_count())
    throw ValidationError("backward: gradient buffer size mismatch");
  const ParamLayout lay(s);
  const auto w = p.values();
  const std::size_t n = s.cells(), in = s.input_dim(), h = s.hidden;
  const auto& z = cache.input;
  const auto& h1 = cache.h1;
  const auto& h2 = cache.h2;

  std::vector<double> g_h2(h, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = upstream[i];
    if (g == 0.0) continue;
    param_grad[lay.b3 + i] += g;
    double* grow = param_grad.data() + lay.w3 + i * h;
    const double* wrow = w.data() + lay.w3 + i * h;
    for (std::size_t k = 0; k < h; ++k) {
      grow[k] += g * h2[k];
      g_h2[k] += g * wrow[k];
    }
  }
  std::vector<double> g_a2(h), g_h1(h, 0.0);
  for (std::size_t j = 0; j < h; ++j) g_a2[j] = g_h2[j] * tanh_prime_from_output(h2[j]);
  for (std::size_t j = 0; j < h; ++j) {
    const double g = g_a2[j];
    param_grad[lay.b2 + j] += g;
    double* grow = param_grad.data() + lay.w2 + j * h;
    const double* wrow = w.data() + lay.w2 + j * h;
    for (std::size_t k = 0; k < h; ++k) {
      grow[k] += g * h1[k];
      g_h1[k] += g * wrow[k];
    }
  }
  Field2D dx(s.rows, s.cols);
  for (std::size_t j = 0; j < h; ++j) {
    const double g = g_h1[j] * tanh_prime_from_output(h1[j]);
    param_grad[lay.b1 + j] += g;
    double* grow = param_grad.data() + lay.w1 + j * in;
    const double* wrow = w.data() + lay.w1 + j * in;
    for (std::size_t k = 0; k < in; ++k) grow[k] += g * z[k];
    for (std::size_t k = 0; k < n; ++k) dx[k] += g * wrow[k];
  }

  if (s.spectral_skip) {
    const auto& plan = *dct_plan(s.rows, s.cols);
    // IDCT is orthogonal, so its adjoint is the forward DCT.
    const Spectrum2D g_hat = plan.forward(upstream);
    const auto phi = skip_basis(cache.t);
    Spectrum2D gx_hat(s.rows, s.cols);
    for (std::size_t k = 0; k < NetShape::kSkipBasis; ++k) {
      double* dax = param_grad.data() + lay.skip_x + k * n;
      double* dbc = param_grad.data() + lay.skip_c + k * n;
      const double* ax = w.data() + lay.skip_x + k * n;
      for (std::size_t i = 0; i < n; ++i) {
        const double pg = NetShape::kSkipGain * phi[k] * g_hat[i];
        dax[i] += pg * cache.x_hat[i];
        dbc[i] += pg * cache.c_hat[i];
        gx_hat[i] += pg * ax[i];
      }
    }
    dx += plan.inverse(gx_hat);
  }
  return dx;
}

VelocityFn as_velocity(const FieldParams& p) {
  return [&p](const Field2D& x, double t, const Field2D& c) { return forward(p, x, c, t); };
}

namespace {

template <class Eval>
GradCheckReport run_probes(Eval&& directional_fd, std::size_t dim, std::span<const double> analytic,
                           int probes, double epsilon, std::uint64_t seed) {
  if (probes < 1) throw ValidationError("gradient check: probe_count must be >= 1");
  Rng rng(seed);
  GradCheckReport rep;
  rep.probe_count = probes;
  rep.epsilon = epsilon;
  std::vector<double> dir(dim);
  for (int k = 0; k < probes; ++k) {
    double nrm = 0.0;
    for (double& d : dir) {
      d = rng.normal();
      nrm += d * d;
    }
    nrm = std::sqrt(nrm);
    double an = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      dir[i] /= nrm;
      an += dir[i] * analytic[i];
    }
    const double fd = directional_fd(dir);
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
    rep.max_relative_error = std::max(rep.max_relative_error, std::abs(fd - an) / denom);
  }
  return rep;
}

} // namespace

GradCheckReport check_param_gradient(const std::function<double(const FieldParams&)>& loss,
                                     const FieldParams& at, std::span<const double> analytic,
                                     int probes, double epsilon, std::uint64_t seed) {
  if (analytic.size() != at.param_count())
    throw ValidationError("check_param_gradient: gradient size mismatch");
  FieldParams probe = at;
  const auto base = at.values();
  auto fd = [&](const std::vector<double>& dir) {
    auto v = probe.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = base[i] + epsilon * dir[i];
    const double up = loss(probe);
    v = probe.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = base[i] - epsilon * dir[i];
    const double down = loss(probe);
    return (up - down) / (2.0 * epsilon);
  };
  return run_probes(fd, at.param_count(), analytic, probes, epsilon, seed);
}

GradCheckReport check_field_gradient(const std::function<double(const Field2D&)>& loss,
                                     const Field2D& at, const Field2D& analytic, int probes,
                                     double epsilon, std::uint64_t seed) {
  require_same_shape(at, analytic, "check_field_gradient");
  auto fd = [&](const std::vector<double>& dir) {
    Field2D up = at, down = at;
    for (std::size_t i = 0; i < at.size(); ++i) {
      up[i] += epsilon * dir[i];
      down[i] -= epsilon * dir[i];
    }
    return (loss(up) - loss(down)) / (2.0 * epsilon);
  };
  return run_probes(fd, at.size(), analytic.values(), probes, epsilon, seed);
}

namespace {

void require_finite_grads(std::span<const double> grads, const char* where) {
  for (double g : grads)
    if (!std::isfinite(g)) throw ValidationError(std::string(where) + ": non-finite gradient");
}

} // namespace

void sgd_update(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size()) throw ValidationError("sgd_step: size mismatch");
  require_finite_grads(grads, "sgd_step");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

void sgd_step(FieldParams& p, std::span<const double> grads, double lr) {
  if (grads.size() != p.param_count()) throw ValidationError("sgd_step: size mismatch");
  require_finite_grads(grads, "sgd_step");
  sgd_update(p.mutable_values(), grads, lr);
}

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw ValidationError("adam_step: size mismatch");
  require_finite_grads(grads, "adam_step");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  if (state.m.size() != params.size()) throw ValidationError("adam_step: state size mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * params[i]);
  }
}

void adam_step(FieldParams& p, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg) {
  if (grads.size() != p.param_count()) throw ValidationError("adam_step: size mismatch");
  require_finite_grads(grads, "adam_step");
  adam_update(p.mutable_values(), grads, state, cfg);
}

std::string encode_params(const FieldParams& p) {
  using namespace io_detail;
  std::string out;
  put_magic(out, kParamsMagic);
  const NetShape& s = p.shape();
  put_u64(out, s.rows);
  put_u64(out, s.cols);
  put_u64(out, s.hidden);
  put_u64(out, s.spectral_skip ? 1 : 0);
  put_u64(out, p.param_count());
  for (double v : p.values()) put_f64(out, v);
  return out;
}

FieldParams decode_params(std::string_view bytes) {
  using namespace io_detail;
  std::size_t pos = 0;
  expect_magic(bytes, pos, kParamsMagic);
  NetShape s;
  s.rows = get_u64(bytes, pos);
  s.cols = get_u64(bytes, pos);
  s.hidden = get_u64(bytes, pos);
  const auto skip = get_u64(bytes, pos);
  if (skip > 1) throw ValidationError("params: bad skip flag");
  s.spectral_skip = skip == 1;
  if (s.rows == 0 || s.cols == 0 || s.hidden == 0 || s.rows > 4096 || s.cols > 4096 ||
      s.hidden > 1 << 16)
    throw ValidationError("params: implausible shape in header");
  const auto count = get_u64(bytes, pos);
  if (count != s.param_count() || bytes.size() != pos + 8 * count)
    throw ValidationError("params: payload length does not match header");
  std::vector<double> values(count);
  for (auto& v : values) v = get_f64(bytes, pos);
  return FieldParams(s, std::move(values));
}

void write_params(const std::filesystem::path& path, const FieldParams& p) {
  write_file(path, encode_params(p));
}

FieldParams read_params(const std::filesystem::path& path) {
  try {
    return decode_params(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

} // namespace sobo
