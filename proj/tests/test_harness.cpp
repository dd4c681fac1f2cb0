#include "doctest.h"
#include "helpers.hpp"

#include "sobolev/diagnostics.hpp"
#include "sobolev/harness.hpp"

#include <cmath>
#include <fstream>

using namespace sobo;
using sobo::testing::TempDir;

namespace {

const Dataset& toy_dataset() {
  static const Dataset ds = [] {
    SynthConfig sc;
    sc.rows = 16;
    sc.cols = 16;
    sc.count = 12;
    sc.seed = 7;
    return build_dataset(sc, DegradeConfig{});
  }();
  return ds;
}

ExperimentConfig toy_config() {
  ExperimentConfig c;
  c.rows = 16;
  c.cols = 16;
  c.hidden = 16;
  c.steps = 30;
  c.batch = 4;
  c.monitor = 8;
  c.euler_steps = 8;
  c.adversary_steps = 20;
  c.adversary_hidden = 8;
  c.adversary_states = 4;
  return c;
}

std::span<const DataPair> train_pairs() { return split_holdout(toy_dataset(), 4).first; }
std::span<const DataPair> holdout_pairs() { return split_holdout(toy_dataset(), 4).second; }

const FieldParams& sft_policy() {
  static const FieldParams p = run_sft(toy_config(), train_pairs()).policy;
  return p;
}

} // namespace

TEST_CASE("variant names") {
  for (Variant v : {Variant::SftOnly, Variant::DpoL2, Variant::Sdpo, Variant::Asdpo})
    CHECK(parse_variant(variant_name(v)) == v);
  CHECK(parse_variant("dpo-l2") == Variant::DpoL2);
  CHECK_THROWS_AS(parse_variant("ppo"), ValidationError);
}

TEST_CASE("experiment config") {
  SUBCASE("defaults") {
    const ExperimentConfig c = ExperimentConfig::from_key_values(KeyValues{});
    CHECK(c.sobolev_s == 1.5);
    CHECK(c.beta == 2000.0);
    CHECK(c.lr == 1e-3);
    CHECK(c.seed == 42);
  }
  SUBCASE("unknown keys and bad values are rejected") {
    CHECK_THROWS_AS(ExperimentConfig::from_key_values(KeyValues::parse("colour=red\n")), ValidationError);
    CHECK_THROWS_AS(ExperimentConfig::from_key_values(KeyValues::parse("sobolev_s=-1\n")), ValidationError);
    CHECK_THROWS_AS(ExperimentConfig::from_key_values(KeyValues::parse("batch=0\n")), ValidationError);
    CHECK_THROWS_AS(ExperimentConfig::from_key_values(KeyValues::parse("steps=x\n")), ValidationError);
  }
  SUBCASE("serialised form round trips") {
    ExperimentConfig c = toy_config();
    c.variant = Variant::Sdpo;
    c.beta = 123.5;
    const ExperimentConfig back = ExperimentConfig::from_key_values(c.to_key_values());
    CHECK(back.to_key_values().serialize() == c.to_key_values().serialize());
    CHECK(c.echo() == c.to_key_values().serialize());
  }
  SUBCASE("load keeps the text and resolves paths") {
    TempDir d("harness_cfg");
    const std::string text = "# toy\nvariant = sdpo\nrows=16\ncols=16\ndataset=data\n";
    write_file(d.path() / "run.cfg", text);
    const ExperimentConfig c = ExperimentConfig::load(d.path() / "run.cfg");
    CHECK(c.echo() == text);
    CHECK(c.variant == Variant::Sdpo);
    CHECK(c.dataset == d.path() / "data");
  }
}

TEST_CASE("holdout split") {
  const auto [train, hold] = split_holdout(toy_dataset(), 4);
  CHECK(train.size() == 8);
  CHECK(hold.size() == 4);
  CHECK(&hold.front() == &toy_dataset().pairs[8]);
  CHECK_THROWS_AS(split_holdout(toy_dataset(), 12), ValidationError);
}

TEST_CASE("sft") {
  SUBCASE("zero learning rate gives a flat curve") {
    ExperimentConfig c = toy_config();
    c.lr = 0.0;
    const PolicyRun run = run_sft(c, train_pairs());
    CHECK(run.report.loss_curve.size() == 31);
    for (const auto& [step, loss] : run.report.loss_curve) CHECK(loss == run.report.loss_curve[0].second);
    CHECK(run.policy == FieldParams::init(c.policy_shape(), derive_seed(c.seed, 1)));
  }
  SUBCASE("same seed gives identical reports") {
    const PolicyRun a = run_sft(toy_config(), train_pairs());
    const PolicyRun b = run_sft(toy_config(), train_pairs());
    CHECK(a.report.serialize() == b.report.serialize());
    CHECK(a.policy == b.policy);
    for (std::size_t i = 1; i < a.report.loss_curve.size(); ++i)
      CHECK(a.report.loss_curve[i].first == a.report.loss_curve[i - 1].first + 1);
  }
  SUBCASE("grid mismatch") {
    ExperimentConfig c = toy_config();
    c.rows = 8;
    CHECK_THROWS_AS(run_sft(c, train_pairs()), ValidationError);
  }
}

TEST_CASE("sft halves the flow matching loss in 500 steps at 16x16") {
  ExperimentConfig c;
  c.rows = 16;
  c.cols = 16;
  c.steps = 500;
  const PolicyRun run = run_sft(c, train_pairs());
  const double first = run.report.loss_curve.front().second;
  const double last = run.report.loss_curve.back().second;
  INFO("initial " << first << " final " << last);
  CHECK(last < 0.5 * first);
}

TEST_CASE("alignment starts at ln 2 for every variant") {
  const ExperimentConfig base = toy_config();
  const AdversaryRun adv = run_adversary(base, sft_policy(), train_pairs());
  for (Variant v : {Variant::DpoL2, Variant::Sdpo, Variant::Asdpo}) {
    ExperimentConfig c = base;
    c.variant = v;
    const PolicyRun run = run_alignment(c, sft_policy(), train_pairs(), &adv.result.state.params);
    REQUIRE(!run.report.loss_curve.empty());
    CHECK(std::abs(run.report.loss_curve.front().second - std::log(2.0)) < 1e-9);
    CHECK(run.report.variant == variant_name(v));
  }
}

TEST_CASE("alignment argument checks") {
  ExperimentConfig c = toy_config();
  c.variant = Variant::Asdpo;
  CHECK_THROWS_AS(run_alignment(c, sft_policy(), train_pairs()), ValidationError);
  c.variant = Variant::SftOnly;
  CHECK_THROWS_AS(run_alignment(c, sft_policy(), train_pairs()), ValidationError);
  c.variant = Variant::Sdpo;
  c.hidden = 17;
  CHECK_THROWS_AS(run_alignment(c, sft_policy(), train_pairs()), ValidationError);
}

TEST_CASE("sdpo at s = 0 reproduces dpo_l2") {
  ExperimentConfig a = toy_config(), b = toy_config();
  a.variant = Variant::Sdpo;
  a.sobolev_s = 0.0;
  a.beta = 50.0;
  b.variant = Variant::DpoL2;
  b.beta = 50.0;
  const PolicyRun ra = run_alignment(a, sft_policy(), train_pairs());
  const PolicyRun rb = run_alignment(b, sft_policy(), train_pairs());
  REQUIRE(ra.report.loss_curve.size() == rb.report.loss_curve.size());
  for (std::size_t i = 0; i < ra.report.loss_curve.size(); ++i)
    CHECK(std::abs(ra.report.loss_curve[i].second - rb.report.loss_curve[i].second) < 1e-12);
  CHECK(ra.policy == rb.policy);
}

TEST_CASE("alignment leaves the reference untouched") {
  const std::string before = encode_params(sft_policy());
  ExperimentConfig c = toy_config();
  c.variant = Variant::Sdpo;
  const PolicyRun run = run_alignment(c, sft_policy(), train_pairs());
  CHECK(encode_params(sft_policy()) == before);
  CHECK(!(run.policy == sft_policy()));
}

TEST_CASE("alignment is deterministic") {
  ExperimentConfig c = toy_config();
  c.variant = Variant::Sdpo;
  const PolicyRun a = run_alignment(c, sft_policy(), train_pairs());
  const PolicyRun b = run_alignment(c, sft_policy(), train_pairs());
  CHECK(a.report.serialize() == b.report.serialize());
  CHECK(a.policy == b.policy);
}

TEST_CASE("step-0 preference gradient matches finite differences") {
  const ExperimentConfig c = toy_config();
  const SobolevOperator op(c.sobolev_s, c.rows, c.cols);
  Rng rng(5);
  PreferenceBatch batch;
  batch.beta = 20.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const DataPair& p = train_pairs()[i];
    batch.items.push_back({p.lq, p.hq, artifact_proxy(p.hq, c.loser, rng),
                           white_field(rng, c.rows, c.cols), 0.2 + 0.3 * static_cast<double>(i)});
  }
  const FieldParams& ref = sft_policy();
  const auto g = sdpo_loss(batch, ref, ref, op).grad;
  const auto rep = check_param_gradient(
      [&](const FieldParams& q) { return sdpo_loss(batch, q, ref, op).loss; }, ref, g, 50, 1e-5, 9);
  CHECK(rep.max_relative_error < 1e-4);
}

TEST_CASE("asdpo with an identity adversary stays at ln 2") {
  ExperimentConfig c = toy_config();
  c.variant = Variant::Asdpo;
  const auto train = train_pairs();
  // The conditional target of the pair whose condition is c.
  const VelocityFn identity = [train](const Field2D& x, double t, const Field2D& cond) {
    for (const auto& p : train)
      if (p.lq == cond) return target_velocity_conditional(x, p.hq, t);
    throw std::logic_error("unknown condition");
  };
  const PolicyRun run = run_alignment(c, sft_policy(), train, identity);
  for (const auto& [step, loss] : run.report.loss_curve) CHECK(std::abs(loss - std::log(2.0)) < 1e-9);
}

TEST_CASE("adversary run") {
  const AdversaryRun a = run_adversary(toy_config(), sft_policy(), train_pairs());
  const AdversaryRun b = run_adversary(toy_config(), sft_policy(), train_pairs());
  CHECK(a.report.serialize() == b.report.serialize());
  CHECK(a.result.state.params == b.result.state.params);
  CHECK(a.report.loss_curve.size() == 20);
  CHECK(a.result.state.params.shape().hidden == 8);
}

TEST_CASE("evaluate") {
  const TrajectoryConfig traj{4, 0.99, 0.99};
  const auto pairs = holdout_pairs();
  SUBCASE("oracle velocity reconstructs the targets") {
    const VelocityFn oracle = [pairs](const Field2D& x, double t, const Field2D& cond) {
      for (const auto& p : pairs)
        if (p.lq == cond) return target_velocity_conditional(x, p.hq, t);
      throw std::logic_error("unknown condition");
    };
    const EvalTable t = evaluate(oracle, pairs, traj);
    for (const auto& r : t.rows) CHECK(r.psnr > 250.0);
    CHECK(t.psd_slope_error < 1e-9);
  }
  SUBCASE("zero policy returns the start noise") {
    const VelocityFn zero = [](const Field2D& x, double, const Field2D&) {
      return Field2D(x.rows(), x.cols());
    };
    const EvalTable t = evaluate(zero, pairs, traj, 77);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      Rng rng(derive_seed(77, i));
      const Field2D x0 = white_field(rng, 16, 16);
      CHECK(t.rows[i].psnr == psnr(x0, pairs[i].hq, kEvalPeak));
      CHECK(t.rows[i].lsd == log_spectral_distance(x0, pairs[i].hq));
    }
  }
  SUBCASE("same seed gives identical tables") {
    const VelocityFn v = as_velocity(sft_policy());
    CHECK(evaluate(v, pairs, traj).to_csv() == evaluate(v, pairs, traj).to_csv());
    const std::string csv = evaluate(v, pairs, traj).to_csv();
    CHECK(csv.rfind("pair,psnr,lsd,psd_slope_error\n0,", 0) == 0);
    CHECK(csv.find("\nmean,") != std::string::npos);
  }
}

TEST_CASE("s sweep") {
  ExperimentConfig c = toy_config();
  const std::vector<double> s{0.0, 1.5};
  const auto rows = run_s_sweep(c, s, sft_policy(), train_pairs(), holdout_pairs());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].s == 0.0);
  CHECK(rows[1].s == 1.5);
  CHECK(rows[0].eval.rows.size() == holdout_pairs().size());

  // The s = 0 row is a dpo_l2 run with the same seed.
  c.variant = Variant::DpoL2;
  const PolicyRun l2 = run_alignment(c, sft_policy(), train_pairs());
  CHECK(evaluate(as_velocity(l2.policy), holdout_pairs(), c.trajectory()).to_csv() ==
        rows[0].eval.to_csv());

  const std::string csv = sweep_to_csv(rows);
  CHECK(csv.rfind("s,psnr,lsd,psd_slope_error\n0,", 0) == 0);
  const std::vector<double> one{1.5};
  CHECK_THROWS_AS(run_s_sweep(c, one, sft_policy(), train_pairs(), holdout_pairs()), ValidationError);
}

TEST_CASE("run outputs") {
  TempDir d("harness_out");
  ExperimentConfig c = toy_config();
  c.source_text = "steps=30\n# verbatim\n";
  c.lr = 0.0;
  const PolicyRun run = run_sft(c, train_pairs());
  write_run(d.path() / "sft", run.report, run.policy);
  CHECK(read_file(d.path() / "sft" / "config_echo.txt") == c.source_text);
  const std::string report = read_file(d.path() / "sft" / "report.txt");
  CHECK(report == run.report.serialize());
  CHECK(report.find("wall") == std::string::npos);
  CHECK(report.rfind("variant=sft_only\ncurve_points=31\n", 0) == 0);
  CHECK(read_file(d.path() / "sft" / "timing.txt").rfind("wall_seconds=", 0) == 0);
  CHECK(read_params(d.path() / "sft" / "params.prm") == run.policy);
}
