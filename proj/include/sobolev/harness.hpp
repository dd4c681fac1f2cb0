#pragma once

#include "sobolev/adversary.hpp"
#include "sobolev/synth.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sobo {

enum class Variant { SftOnly, DpoL2, Sdpo, Asdpo };

std::string variant_name(Variant v);
/// Accepts "sft_only", "dpo_l2", "sdpo", "asdpo" and the dashed CLI spellings.
Variant parse_variant(const std::string& name);

struct ExperimentConfig {
  Variant variant = Variant::SftOnly;
  double sobolev_s = 1.5;
  double beta = kDefaultBeta;
  int steps = 500;
  std::size_t batch = 8;
  double lr = 1e-3;
  std::uint64_t seed = 42;
  std::size_t rows = 16;
  std::size_t cols = 16;
  std::size_t hidden = 64;
  std::filesystem::path dataset;
  std::filesystem::path output;

  std::size_t holdout = 0;       // trailing pairs kept out of training
  std::size_t monitor = 16;      // fixed (x0, t) draws the SFT loss curve is measured on
  int euler_steps = kDefaultEulerSteps;
  double t_max = kDefaultTMax;
  double horizon = kDefaultHorizon;

  // Static losers for dpo_l2 / sdpo.
  ArtifactConfig loser{};

  // Adversary (asdpo).
  double epsilon = 0.1;
  int adversary_steps = 2000;
  std::size_t adversary_hidden = 32;
  std::size_t adversary_states = 16;
  double adversary_lr = 1e-3;

  /// Raw text the config was read from; echoed verbatim into run outputs.
  std::string source_text;

  void validate() const;

  /// Unknown keys are rejected.
  static ExperimentConfig from_key_values(const KeyValues& kv);
  static ExperimentConfig load(const std::filesystem::path& path);
  KeyValues to_key_values() const;
  /// source_text if set, otherwise the serialised key=value form.
  std::string echo() const;

  NetShape policy_shape() const { return {rows, cols, hidden, true}; }
  TrajectoryConfig trajectory() const { return {euler_steps, t_max, horizon}; }
};

struct RunReport {
  std::string variant;
  std::vector<std::pair<int, double>> loss_curve;
  std::vector<std::pair<std::string, std::string>> metrics; // ordered key=value
  std::string config_echo;
  double wall_seconds = 0.0; // written to a separate file, never into the report

  void add_metric(const std::string& key, double value);
  /// Key=value header, blank line, then "step,loss" CSV.
  std::string serialize() const;
};

/// Splits off the trailing `holdout` pairs.
std::pair<std::span<const DataPair>, std::span<const DataPair>>
split_holdout(const Dataset& ds, std::size_t holdout);

struct PolicyRun {
  FieldParams policy;
  RunReport report;
};

/// Conditional flow matching with Adam. The loss curve is measured on a fixed
/// monitor set so it reflects parameter change only.
PolicyRun run_sft(const ExperimentConfig& cfg, std::span<const DataPair> train);

/// Preference alignment starting from (a copy of) the SFT policy, which is
/// also the frozen reference. asdpo needs `adversary`.
PolicyRun run_alignment(const ExperimentConfig& cfg, const FieldParams& sft_policy,
                        std::span<const DataPair> train,
                        const FieldParams* adversary = nullptr);

/// asdpo with an arbitrary frozen adversary velocity in place of v_base + P(A_phi).
PolicyRun run_alignment(const ExperimentConfig& cfg, const FieldParams& sft_policy,
                        std::span<const DataPair> train, const VelocityFn& adversary);

struct AdversaryRun {
  AdversaryTrainResult result;
  RunReport report;
};

/// Trains A_phi against the residual energy of the frozen policy on states
/// drawn from the training pairs.
AdversaryRun run_adversary(const ExperimentConfig& cfg, const FieldParams& policy,
                           std::span<const DataPair> train);

struct EvalRow {
  std::size_t pair = 0;
  double psnr = 0.0;
  double lsd = 0.0;
  double psd_slope_error = 0.0;
};

struct EvalTable {
  std::vector<EvalRow> rows;
  double mean_psnr = 0.0;
  double mean_lsd = 0.0;
  double psd_slope_generated = 0.0;
  double psd_slope_target = 0.0;
  double psd_slope_error = 0.0; // |generated - target| on the ensemble PSDs

  /// "pair,psnr,lsd,psd_slope_error" rows then a "mean" row carrying the
  /// ensemble slope error.
  std::string to_csv() const;
};

inline constexpr std::uint64_t kEvalSeed = 20251;
inline constexpr double kEvalPeak = 2.0; // data lives in [-1, 1]

/// Euler reconstruction of every pair from fresh noise x0_i drawn with
/// derive_seed(seed, i), then PSNR / LSD / PSD-slope metrics against hq.
EvalTable evaluate(const VelocityFn& policy, std::span<const DataPair> pairs,
                   const TrajectoryConfig& traj, std::uint64_t seed = kEvalSeed);

struct SweepRow {
  double s = 0.0;
  EvalTable eval;
};

/// One sdpo alignment per s value from the same SFT policy and seed, scored on
/// the held-out pairs.
std::vector<SweepRow> run_s_sweep(const ExperimentConfig& base, std::span<const double> s_values,
                                  const FieldParams& sft_policy, std::span<const DataPair> train,
                                  std::span<const DataPair> holdout);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

/// Writes config echo, report, parameters and timing into `dir`.
void write_run(const std::filesystem::path& dir, const RunReport& report,
               const FieldParams& params);

} // namespace sobo
