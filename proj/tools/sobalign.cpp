// sobalign: command-line driver for data generation, training, evaluation
// and the verification suites.

#include "CLI11.hpp"

#include "sobolev/harness.hpp"
#include "sobolev/verify.hpp"

#include <cstdio>
#include <iostream>
#include <optional>

using namespace sobo;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kValidation = 3, kVerification = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::uint64_t seed = 42;
  bool seed_given = false;

  std::string config, policy, adversary, data, input, out, variant, values, which = "hq";
  std::size_t holdout = 0;
  int euler_steps = kDefaultEulerSteps;

  double s = 1.5, eps = 0.1;
  std::string widths;
  std::size_t samples = 100000;
};

ExperimentConfig load_config(const Options& o) {
  ExperimentConfig cfg = ExperimentConfig::load(o.config);
  if (o.seed_given) cfg.seed = o.seed;
  return cfg;
}

std::filesystem::path output_dir(const Options& o, const ExperimentConfig& cfg) {
  if (!o.out.empty()) return o.out;
  if (!cfg.output.empty()) return cfg.output;
  throw ValidationError("no output directory: set 'output' in the config or pass --out");
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.empty()) throw ValidationError("config has no 'dataset'");
  return load_archive(cfg.dataset);
}

void log(const std::string& line) { std::cerr << line << '\n'; }

std::string last_loss(const RunReport& r) {
  return r.loss_curve.empty() ? "-" : format_double(r.loss_curve.back().second);
}

int cmd_gen_data(const Options& o) {
  DataSpec spec = DataSpec::load(o.config);
  if (o.seed_given) spec.synth.seed = o.seed;
  if (!o.out.empty()) spec.output = o.out;
  if (spec.output.empty()) throw ValidationError("no output directory: set 'output' or pass --out");
  const Dataset ds = build_dataset(spec.synth, spec.degrade);
  write_archive(spec.output, ds);
  log("gen-data: wrote " + std::to_string(ds.pairs.size()) + " pairs to " + spec.output.string());
  return kOk;
}

int cmd_sft(const Options& o) {
  const ExperimentConfig cfg = load_config(o);
  const auto dir = output_dir(o, cfg);
  const Dataset ds = load_dataset(cfg);
  const auto train = split_holdout(ds, cfg.holdout).first;
  const PolicyRun run = run_sft(cfg, train);
  write_run(dir, run.report, run.policy);
  log("sft: " + std::to_string(cfg.steps) + " steps, monitor loss " +
      format_double(run.report.loss_curve.front().second) + " -> " + last_loss(run.report));
  return kOk;
}

int cmd_train_adversary(const Options& o) {
  const ExperimentConfig cfg = load_config(o);
  const auto dir = output_dir(o, cfg);
  const Dataset ds = load_dataset(cfg);
  const FieldParams policy = read_params(o.policy);
  const AdversaryRun run = run_adversary(cfg, policy, split_holdout(ds, cfg.holdout).first);
  write_run(dir, run.report, run.result.state.params);
  log("train-adversary: energy -> " + last_loss(run.report));
  return kOk;
}

int cmd_align(const Options& o) {
  const Variant v = parse_variant(o.variant);
  if (v == Variant::SftOnly) throw UsageError("align: --variant must be dpo-l2, sdpo or asdpo");
  if (v == Variant::Asdpo && o.adversary.empty())
    throw UsageError("align: --variant asdpo requires --adversary <path>");
  ExperimentConfig cfg = load_config(o);
  cfg.variant = v;
  const auto dir = output_dir(o, cfg);
  const Dataset ds = load_dataset(cfg);
  const FieldParams sft = read_params(o.policy);
  std::optional<FieldParams> adv;
  if (v == Variant::Asdpo) adv = read_params(o.adversary);
  const PolicyRun run =
      run_alignment(cfg, sft, split_holdout(ds, cfg.holdout).first, adv ? &*adv : nullptr);
  write_run(dir, run.report, run.policy);
  log("align " + variant_name(v) + ": loss -> " + last_loss(run.report));
  return kOk;
}

int cmd_eval(const Options& o) {
  const FieldParams policy = read_params(o.policy);
  const Dataset ds = load_archive(o.data);
  std::span<const DataPair> pairs(ds.pairs);
  if (o.holdout > 0) pairs = split_holdout(ds, o.holdout).second;
  TrajectoryConfig traj;
  traj.steps = o.euler_steps;
  const EvalTable t = evaluate(as_velocity(policy), pairs, traj, o.seed);
  std::cout << t.to_csv();
  return kOk;
}

int cmd_psd(const Options& o) {
  if (o.which != "hq" && o.which != "lq") throw UsageError("psd: --which must be hq or lq");
  const Dataset ds = load_archive(o.input);
  PsdAccumulator acc(ds.pairs.front().hq.rows(), ds.pairs.front().hq.cols());
  for (const auto& p : ds.pairs) acc.add(o.which == "hq" ? p.hq : p.lq);
  const PsdEstimate psd = acc.finish();
  write_file(o.out, psd_to_csv(psd));
  log("psd: " + std::to_string(psd.sample_count) + " fields, slope " + format_double(psd_slope(psd)));
  return kOk;
}

int cmd_sweep_s(const Options& o) {
  const std::vector<double> values = parse_double_list(o.values);
  const ExperimentConfig cfg = load_config(o);
  if (cfg.holdout == 0) throw ValidationError("sweep-s: config needs holdout > 0");
  const Dataset ds = load_dataset(cfg);
  const auto [train, hold] = split_holdout(ds, cfg.holdout);
  const FieldParams sft = o.policy.empty() ? run_sft(cfg, train).policy : read_params(o.policy);
  std::cout << sweep_to_csv(run_s_sweep(cfg, values, sft, train, hold));
  return kOk;
}

int report_verification(const VerifyReport& r) {
  std::cout << r.to_text();
  return r.passed() ? kOk : kVerification;
}

int cmd_verify_prop1(const Options& o) {
  Prop1Options p;
  p.s = o.s;
  p.eps = o.eps;
  p.seed = o.seed;
  return report_verification(verify_prop1(p));
}

int cmd_verify_prop2(const Options& o) {
  Prop2Options p;
  p.seed = o.seed;
  if (!o.widths.empty()) {
    p.widths.clear();
    for (double w : parse_double_list(o.widths)) {
      if (!(w >= 1.0) || w != static_cast<double>(static_cast<std::size_t>(w)))
        throw ValidationError("prop2: widths must be positive integers");
      p.widths.push_back(static_cast<std::size_t>(w));
    }
  }
  return report_verification(verify_prop2(p));
}

int cmd_verify_spectral(const Options& o) {
  SpectralOptions p;
  p.seed = o.seed;
  p.coloring_samples = o.samples;
  const int a = report_verification(verify_spectral_identities(p));
  const int b = report_verification(verify_coloring(p));
  return a == kOk && b == kOk ? kOk : kVerification;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sobolev preference alignment toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  auto* seed_opt = app.add_option("--seed", o.seed, "Root seed for every random stream")
                       ->capture_default_str();

  auto* gen = app.add_subcommand("gen-data", "Build a synthetic power-law dataset archive");
  gen->add_option("--config", o.config, "Data config (key=value)")->required();
  gen->add_option("--out", o.out, "Archive directory (overrides 'output')");

  auto* sft = app.add_subcommand("sft", "Flow-matching pretraining");
  sft->add_option("--config", o.config, "Experiment config")->required();
  sft->add_option("--out", o.out, "Run directory (overrides 'output')");

  auto* adv = app.add_subcommand("train-adversary", "Train the perturbation network");
  adv->add_option("--config", o.config, "Experiment config")->required();
  adv->add_option("--policy", o.policy, "Frozen policy parameters")->required();
  adv->add_option("--out", o.out, "Run directory (overrides 'output')");

  auto* align = app.add_subcommand("align", "Preference alignment from an SFT policy");
  align->add_option("--variant", o.variant, "dpo-l2, sdpo or asdpo")->required();
  align->add_option("--config", o.config, "Experiment config")->required();
  align->add_option("--policy", o.policy, "SFT policy parameters")->required();
  align->add_option("--adversary", o.adversary, "Adversary parameters (asdpo)");
  align->add_option("--out", o.out, "Run directory (overrides 'output')");

  auto* eval = app.add_subcommand("eval", "Reconstruct and score an archive; CSV on stdout");
  eval->add_option("--policy", o.policy, "Policy parameters")->required();
  eval->add_option("--data", o.data, "Dataset archive")->required();
  eval->add_option("--holdout", o.holdout, "Score only the trailing N pairs");
  eval->add_option("--euler-steps", o.euler_steps, "Euler steps")->capture_default_str();

  auto* verify = app.add_subcommand("verify", "Oracle suites");
  verify->require_subcommand(1);
  auto* prop1 = verify->add_subcommand("prop1", "Closed-form worst-case perturbation");
  prop1->add_option("--s", o.s, "Sobolev order")->capture_default_str();
  prop1->add_option("--eps", o.eps, "Budget")->capture_default_str();
  auto* prop2 = verify->add_subcommand("prop2", "Trained adversary and capacity sweep");
  prop2->add_option("--widths", o.widths, "Comma-separated hidden widths");
  auto* spectral = verify->add_subcommand("spectral", "Parseval, operator algebra, colouring");
  spectral->add_option("--samples", o.samples, "Colouring samples per order")->capture_default_str();

  auto* psd = app.add_subcommand("psd", "Radial PSD of an archive");
  psd->add_option("--input", o.input, "Dataset archive")->required();
  psd->add_option("--out", o.out, "CSV output path")->required();
  psd->add_option("--which", o.which, "hq or lq")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep-s", "sdpo over several Sobolev orders; CSV on stdout");
  sweep->add_option("--values", o.values, "Comma-separated s values")->required();
  sweep->add_option("--config", o.config, "Experiment config")->required();
  sweep->add_option("--policy", o.policy, "SFT policy (trained from the config when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  o.seed_given = seed_opt->count() > 0;

  try {
    if (*gen) return cmd_gen_data(o);
    if (*sft) return cmd_sft(o);
    if (*adv) return cmd_train_adversary(o);
    if (*align) return cmd_align(o);
    if (*eval) return cmd_eval(o);
    if (*psd) return cmd_psd(o);
    if (*sweep) return cmd_sweep_s(o);
    if (*prop1) return cmd_verify_prop1(o);
    if (*prop2) return cmd_verify_prop2(o);
    if (*spectral) return cmd_verify_spectral(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kUsage;
}
