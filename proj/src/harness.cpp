#include "sobolev/harness.hpp"

#include "sobolev/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <set>

namespace sobo {

std::string variant_name(Variant v) {
  switch (v) {
  case Variant::SftOnly: return "sft_only";
  case Variant::DpoL2: return "dpo_l2";
  case Variant::Sdpo: return "sdpo";
  case Variant::Asdpo: return "asdpo";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "sft_only" || name == "sft-only") return Variant::SftOnly;
  if (name == "dpo_l2" || name == "dpo-l2") return Variant::DpoL2;
  if (name == "sdpo") return Variant::Sdpo;
  if (name == "asdpo") return Variant::Asdpo;
  throw ValidationError("unknown variant '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (!(sobolev_s >= 0.0) || !std::isfinite(sobolev_s))
    throw ValidationError("config: sobolev_s must be >= 0");
  if (!(beta > 0.0)) throw ValidationError("config: beta must be > 0");
  if (steps < 0) throw ValidationError("config: steps must be >= 0");
  if (batch < 1) throw ValidationError("config: batch must be >= 1");
  if (!(lr >= 0.0)) throw ValidationError("config: lr must be >= 0");
  if (rows == 0 || cols == 0 || hidden == 0)
    throw ValidationError("config: rows, cols and hidden must be positive");
  if (monitor < 1) throw ValidationError("config: monitor must be >= 1");
  trajectory().validate();
  TrustRegion{epsilon, TrustRegion::Schedule::Constant}.validate();
  if (adversary_steps < 0) throw ValidationError("config: adversary_steps must be >= 0");
  if (adversary_hidden == 0 || adversary_states == 0)
    throw ValidationError("config: adversary_hidden and adversary_states must be positive");
  if (loser.resample_factor < 1 || loser.quant_levels < 1 || !(loser.blur_sigma >= 0.0))
    throw ValidationError("config: bad loser settings");
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "variant", "sobolev_s", "beta", "steps", "batch", "lr", "seed", "rows", "cols", "hidden",
      "dataset", "output", "holdout", "monitor", "euler_steps", "t_max", "horizon",
      "loser_blur", "loser_resample", "loser_levels", "loser_texture", "epsilon",
      "adversary_steps", "adversary_hidden", "adversary_states", "adversary_lr"};
  return keys;
}

std::size_t get_size(const KeyValues& kv, const std::string& key, std::size_t fallback) {
  const long long v = kv.get_int(key, static_cast<long long>(fallback));
  if (v < 0) throw ValidationError("config: " + key + " must be >= 0");
  return static_cast<std::size_t>(v);
}

int get_int32(const KeyValues& kv, const std::string& key, int fallback) {
  const long long v = kv.get_int(key, fallback);
  if (v < -2147483647LL || v > 2147483647LL) throw ValidationError("config: " + key + " out of range");
  return static_cast<int>(v);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void require_pairs(std::span<const DataPair> pairs, const ExperimentConfig& cfg, const char* where) {
  if (pairs.empty()) throw ValidationError(std::string(where) + ": no training pairs");
  for (const auto& p : pairs)
    if (p.hq.rows() != cfg.rows || p.hq.cols() != cfg.cols || !p.lq.same_shape(p.hq))
      throw ValidationError(std::string(where) + ": dataset grid does not match config " +
                            std::to_string(cfg.rows) + "x" + std::to_string(cfg.cols));
}

struct Draw {
  std::size_t index;
  Field2D x0;
  double t;
};

Draw draw(Rng& rng, std::size_t n, const ExperimentConfig& cfg) {
  Draw d;
  d.index = static_cast<std::size_t>(rng.below(n));
  d.x0 = white_field(rng, cfg.rows, cfg.cols);
  d.t = rng.uniform() * cfg.horizon;
  return d;
}

} // namespace

ExperimentConfig ExperimentConfig::from_key_values(const KeyValues& kv) {
  for (const auto& [key, value] : kv.entries())
    if (!known_keys().count(key)) throw ValidationError("config: unknown key '" + key + "'");
  ExperimentConfig c;
  if (kv.has("variant")) c.variant = parse_variant(kv.get("variant"));
  c.sobolev_s = kv.get_double("sobolev_s", c.sobolev_s);
  c.beta = kv.get_double("beta", c.beta);
  c.steps = get_int32(kv, "steps", c.steps);
  c.batch = get_size(kv, "batch", c.batch);
  c.lr = kv.get_double("lr", c.lr);
  c.seed = kv.get_u64("seed", c.seed);
  c.rows = get_size(kv, "rows", c.rows);
  c.cols = get_size(kv, "cols", c.cols);
  c.hidden = get_size(kv, "hidden", c.hidden);
  c.dataset = kv.get_or("dataset", "");
  c.output = kv.get_or("output", "");
  c.holdout = get_size(kv, "holdout", c.holdout);
  c.monitor = get_size(kv, "monitor", c.monitor);
  c.euler_steps = get_int32(kv, "euler_steps", c.euler_steps);
  c.t_max = kv.get_double("t_max", c.t_max);
  c.horizon = kv.get_double("horizon", c.horizon);
  c.loser.blur_sigma = kv.get_double("loser_blur", c.loser.blur_sigma);
  c.loser.resample_factor = get_size(kv, "loser_resample", c.loser.resample_factor);
  c.loser.quant_levels = get_int32(kv, "loser_levels", c.loser.quant_levels);
  c.loser.texture_amplitude = kv.get_double("loser_texture", c.loser.texture_amplitude);
  c.epsilon = kv.get_double("epsilon", c.epsilon);
  c.adversary_steps = get_int32(kv, "adversary_steps", c.adversary_steps);
  c.adversary_hidden = get_size(kv, "adversary_hidden", c.adversary_hidden);
  c.adversary_states = get_size(kv, "adversary_states", c.adversary_states);
  c.adversary_lr = kv.get_double("adversary_lr", c.adversary_lr);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  ExperimentConfig c = from_key_values(KeyValues::parse(text));
  c.source_text = text;
  // Relative data and output paths resolve against the config's directory.
  const auto base = path.parent_path();
  if (!c.dataset.empty() && c.dataset.is_relative()) c.dataset = base / c.dataset;
  if (!c.output.empty() && c.output.is_relative()) c.output = base / c.output;
  return c;
}

KeyValues ExperimentConfig::to_key_values() const {
  KeyValues kv;
  kv.set("variant", variant_name(variant));
  kv.set("sobolev_s", format_double(sobolev_s));
  kv.set("beta", format_double(beta));
  kv.set("steps", std::to_string(steps));
  kv.set("batch", std::to_string(batch));
  kv.set("lr", format_double(lr));
  kv.set("seed", std::to_string(seed));
  kv.set("rows", std::to_string(rows));
  kv.set("cols", std::to_string(cols));
  kv.set("hidden", std::to_string(hidden));
  if (!dataset.empty()) kv.set("dataset", dataset.string());
  if (!output.empty()) kv.set("output", output.string());
  kv.set("holdout", std::to_string(holdout));
  kv.set("monitor", std::to_string(monitor));
  kv.set("euler_steps", std::to_string(euler_steps));
  kv.set("t_max", format_double(t_max));
  kv.set("horizon", format_double(horizon));
  kv.set("loser_blur", format_double(loser.blur_sigma));
  kv.set("loser_resample", std::to_string(loser.resample_factor));
  kv.set("loser_levels", std::to_string(loser.quant_levels));
  kv.set("loser_texture", format_double(loser.texture_amplitude));
  kv.set("epsilon", format_double(epsilon));
  kv.set("adversary_steps", std::to_string(adversary_steps));
  kv.set("adversary_hidden", std::to_string(adversary_hidden));
  kv.set("adversary_states", std::to_string(adversary_states));
  kv.set("adversary_lr", format_double(adversary_lr));
  return kv;
}

std::string ExperimentConfig::echo() const {
  return source_text.empty() ? to_key_values().serialize() : source_text;
}

void RunReport::add_metric(const std::string& key, double value) {
  metrics.emplace_back(key, format_double(value));
}

std::string RunReport::serialize() const {
  std::string out = "variant=" + variant + "\n";
  out += "curve_points=" + std::to_string(loss_curve.size()) + "\n";
  for (const auto& [k, v] : metrics) out += k + "=" + v + "\n";
  out += "\nstep,loss\n";
  for (const auto& [step, value] : loss_curve)
    out += std::to_string(step) + "," + format_double(value) + "\n";
  return out;
}

std::pair<std::span<const DataPair>, std::span<const DataPair>>
split_holdout(const Dataset& ds, std::size_t holdout) {
  if (holdout >= ds.pairs.size())
    throw ValidationError("holdout " + std::to_string(holdout) + " leaves no training pairs out of " +
                          std::to_string(ds.pairs.size()));
  const std::span<const DataPair> all(ds.pairs);
  const std::size_t n = all.size() - holdout;
  return {all.first(n), all.subspan(n)};
}

PolicyRun run_sft(const ExperimentConfig& cfg, std::span<const DataPair> train) {
  cfg.validate();
  require_pairs(train, cfg, "run_sft");
  const auto start = std::chrono::steady_clock::now();
  PolicyRun run{FieldParams::init(cfg.policy_shape(), derive_seed(cfg.seed, 1)), {}};
  FieldParams& policy = run.policy;

  std::vector<Draw> monitor;
  Rng mrng(derive_seed(cfg.seed, 3));
  for (std::size_t m = 0; m < cfg.monitor; ++m) monitor.push_back(draw(mrng, train.size(), cfg));
  auto monitor_loss = [&] {
    double sum = 0.0;
    for (const auto& d : monitor) {
      const DataPair& p = train[d.index];
      sum += cfm_loss(forward(policy, interpolate(d.x0, p.hq, d.t), p.lq, d.t), d.x0, p.hq);
    }
    return sum / static_cast<double>(monitor.size());
  };

  Rng rng(derive_seed(cfg.seed, 2));
  const AdamConfig adam_cfg{cfg.lr};
  AdamState adam;
  std::vector<double> grad(policy.param_count());
  ForwardCache cache;
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch);
  for (int step = 0; step <= cfg.steps; ++step) {
    const double m = monitor_loss();
    if (!std::isfinite(m)) throw DivergenceError("run_sft: non-finite loss", step);
    run.report.loss_curve.emplace_back(step, m);
    if (step == cfg.steps) break;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const Draw d = draw(rng, train.size(), cfg);
      const DataPair& p = train[d.index];
      const Field2D v = forward(policy, interpolate(d.x0, p.hq, d.t), p.lq, d.t, &cache);
      backward(policy, cache, cfm_loss_grad(v, d.x0, p.hq) * inv_batch, grad);
    }
    adam_step(policy, grad, adam, adam_cfg);
  }

  run.report.variant = variant_name(Variant::SftOnly);
  run.report.add_metric("initial_loss", run.report.loss_curve.front().second);
  run.report.add_metric("final_loss", run.report.loss_curve.back().second);
  run.report.config_echo = cfg.echo();
  run.report.wall_seconds = seconds_since(start);
  return run;
}

namespace {

PolicyRun align_impl(const ExperimentConfig& cfg, const FieldParams& sft_policy,
                     std::span<const DataPair> train, const FieldParams* adversary,
                     const VelocityFn* adversary_fn) {
  cfg.validate();
  require_pairs(train, cfg, "run_alignment");
  if (cfg.variant == Variant::SftOnly)
    throw ValidationError("run_alignment: variant must be dpo_l2, sdpo or asdpo");
  if (cfg.variant == Variant::Asdpo && adversary == nullptr && adversary_fn == nullptr)
    throw ValidationError("run_alignment: asdpo requires a trained adversary");
  if (!(sft_policy.shape() == cfg.policy_shape()))
    throw ValidationError("run_alignment: policy shape does not match config");
  const auto start = std::chrono::steady_clock::now();

  const FieldParams reference = sft_policy;
  PolicyRun run{sft_policy, {}};
  FieldParams& policy = run.policy;
  const SobolevOperator op(cfg.sobolev_s, cfg.rows, cfg.cols);
  const TrustRegion trust{cfg.epsilon, TrustRegion::Schedule::Constant};
  VelocityFn adv_velocity;
  if (cfg.variant == Variant::Asdpo)
    adv_velocity = adversary_fn ? *adversary_fn : adversary_velocity(*adversary, reference, op, trust);

  Rng rng(derive_seed(cfg.seed, 4));
  const AdamConfig adam_cfg{cfg.lr};
  AdamState adam;
  for (int step = 0; step < cfg.steps; ++step) {
    PreferenceBatch batch;
    batch.beta = cfg.beta;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      Draw d = draw(rng, train.size(), cfg);
      const DataPair& p = train[d.index];
      PreferenceItem item{p.lq, p.hq, {}, std::move(d.x0), d.t};
      if (cfg.variant != Variant::Asdpo) item.loser = artifact_proxy(p.hq, cfg.loser, rng);
      batch.items.push_back(std::move(item));
    }
    LossAndGrad lg;
    switch (cfg.variant) {
    case Variant::DpoL2: lg = dpo_l2_loss(batch, policy, reference, cfg.t_max); break;
    case Variant::Sdpo: lg = sdpo_loss(batch, policy, reference, op, cfg.t_max); break;
    default: lg = asdpo_loss(batch, policy, reference, adv_velocity, op, cfg.t_max); break;
    }
    if (!std::isfinite(lg.loss)) throw DivergenceError("run_alignment: non-finite loss", step);
    run.report.loss_curve.emplace_back(step, lg.loss);
    adam_step(policy, lg.grad, adam, adam_cfg);
  }

  run.report.variant = variant_name(cfg.variant);
  if (!run.report.loss_curve.empty()) {
    run.report.add_metric("initial_loss", run.report.loss_curve.front().second);
    run.report.add_metric("final_loss", run.report.loss_curve.back().second);
  }
  run.report.config_echo = cfg.echo();
  run.report.wall_seconds = seconds_since(start);
  return run;
}

} // namespace

PolicyRun run_alignment(const ExperimentConfig& cfg, const FieldParams& sft_policy,
                        std::span<const DataPair> train, const FieldParams* adversary) {
  return align_impl(cfg, sft_policy, train, adversary, nullptr);
}

PolicyRun run_alignment(const ExperimentConfig& cfg, const FieldParams& sft_policy,
                        std::span<const DataPair> train, const VelocityFn& adversary) {
  return align_impl(cfg, sft_policy, train, nullptr, &adversary);
}

AdversaryRun run_adversary(const ExperimentConfig& cfg, const FieldParams& policy,
                           std::span<const DataPair> train) {
  cfg.validate();
  require_pairs(train, cfg, "run_adversary");
  if (!(policy.shape() == cfg.policy_shape()))
    throw ValidationError("run_adversary: policy shape does not match config");
  const auto start = std::chrono::steady_clock::now();

  std::vector<AdversaryTask> tasks;
  Rng rng(derive_seed(cfg.seed, 5));
  for (std::size_t k = 0; k < cfg.adversary_states; ++k) {
    const Draw d = draw(rng, train.size(), cfg);
    const DataPair& p = train[d.index];
    tasks.push_back({interpolate(d.x0, p.hq, d.t), p.lq, d.t,
                     residual_energy_fn(policy, p.lq, d.t, p.hq, cfg.t_max)});
  }
  const SobolevOperator op(cfg.sobolev_s, cfg.rows, cfg.cols);
  const TrustRegion trust{cfg.epsilon, TrustRegion::Schedule::Constant};
  AdversaryTrainConfig tc;
  tc.steps = cfg.adversary_steps;
  tc.adam.lr = cfg.adversary_lr;
  tc.seed = cfg.seed;
  AdversaryState state{
      FieldParams::init({cfg.rows, cfg.cols, cfg.adversary_hidden, false}, derive_seed(cfg.seed, 6)),
      tc};

  AdversaryRun run{train_adversary(std::move(state), tasks, op, trust), {}};
  const auto& curve = run.result.loss_curve;
  for (std::size_t i = 0; i < curve.size(); ++i)
    run.report.loss_curve.emplace_back(static_cast<int>(i), curve[i]);
  run.report.variant = "adversary";
  if (!curve.empty()) {
    run.report.add_metric("initial_energy", curve.front());
    run.report.add_metric("final_energy", curve.back());
  }
  run.report.add_metric("cosine", adversary_cosine(run.result.state.params, tasks, op, trust));
  run.report.config_echo = cfg.echo();
  run.report.wall_seconds = seconds_since(start);
  return run;
}

std::string EvalTable::to_csv() const {
  std::string out = "pair,psnr,lsd,psd_slope_error\n";
  for (const auto& r : rows)
    out += std::to_string(r.pair) + "," + format_double(r.psnr) + "," + format_double(r.lsd) +
           "," + format_double(r.psd_slope_error) + "\n";
  out += "mean," + format_double(mean_psnr) + "," + format_double(mean_lsd) + "," +
         format_double(psd_slope_error) + "\n";
  return out;
}

EvalTable evaluate(const VelocityFn& policy, std::span<const DataPair> pairs,
                   const TrajectoryConfig& traj, std::uint64_t seed) {
  if (pairs.empty()) throw ValidationError("evaluate: no pairs");
  traj.validate();
  EvalTable table;
  const std::size_t rows = pairs.front().hq.rows(), cols = pairs.front().hq.cols();
  PsdAccumulator gen_psd(rows, cols), target_psd(rows, cols);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const DataPair& p = pairs[i];
    Rng rng(derive_seed(seed, i));
    const Field2D x0 = white_field(rng, p.hq.rows(), p.hq.cols());
    const Field2D x = euler_integrate(policy, x0, p.lq, traj);
    EvalRow row;
    row.pair = i;
    row.psnr = psnr(x, p.hq, kEvalPeak);
    row.lsd = log_spectral_distance(x, p.hq);
    const std::array<Field2D, 1> gen{x}, tgt{p.hq};
    row.psd_slope_error = std::abs(psd_slope(estimate_psd(gen)) - psd_slope(estimate_psd(tgt)));
    gen_psd.add(x);
    target_psd.add(p.hq);
    table.mean_psnr += row.psnr;
    table.mean_lsd += row.lsd;
    table.rows.push_back(row);
  }
  table.mean_psnr /= static_cast<double>(pairs.size());
  table.mean_lsd /= static_cast<double>(pairs.size());
  table.psd_slope_generated = psd_slope(gen_psd.finish());
  table.psd_slope_target = psd_slope(target_psd.finish());
  table.psd_slope_error = std::abs(table.psd_slope_generated - table.psd_slope_target);
  return table;
}

std::vector<SweepRow> run_s_sweep(const ExperimentConfig& base, std::span<const double> s_values,
                                  const FieldParams& sft_policy, std::span<const DataPair> train,
                                  std::span<const DataPair> holdout) {
  if (s_values.size() < 2) throw ValidationError("run_s_sweep: need at least two s values");
  if (holdout.empty()) throw ValidationError("run_s_sweep: no held-out pairs");
  std::vector<SweepRow> rows;
  for (double s : s_values) {
    ExperimentConfig cfg = base;
    cfg.variant = Variant::Sdpo;
    cfg.sobolev_s = s;
    const PolicyRun run = run_alignment(cfg, sft_policy, train);
    rows.push_back({s, evaluate(as_velocity(run.policy), holdout, cfg.trajectory())});
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "s,psnr,lsd,psd_slope_error\n";
  for (const auto& r : rows)
    out += format_double(r.s) + "," + format_double(r.eval.mean_psnr) + "," +
           format_double(r.eval.mean_lsd) + "," + format_double(r.eval.psd_slope_error) + "\n";
  return out;
}

void write_run(const std::filesystem::path& dir, const RunReport& report,
               const FieldParams& params) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  write_file(dir / "config_echo.txt", report.config_echo);
  write_file(dir / "report.txt", report.serialize());
  write_params(dir / "params.prm", params);
  write_file(dir / "timing.txt", "wall_seconds=" + format_double(report.wall_seconds) + "\n");
}

} // namespace sobo
