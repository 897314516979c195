#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "pragsim/error.hpp"
#include "pragsim/harness.hpp"

using namespace pragsim;

namespace {

ModelSpec method(const std::string& key, Selection s, Engine e, TimeAdjust ta, EffectModel em) {
  ModelSpec m;
  m.key = key;
  m.selection = s;
  m.engine = e;
  m.time_adjust = ta;
  m.effect_model = em;
  return m;
}

ReplicateResult result(double est, double se, bool reject, bool converged = true) {
  ReplicateResult r;
  r.effect_estimate = est;
  r.effect_se = se;
  r.ci_low = est - 1.96 * se;
  r.ci_high = est + 1.96 * se;
  r.reject = reject;
  r.converged = converged;
  return r;
}

bool same(const ReplicateResult& a, const ReplicateResult& b) {
  return a.method_key == b.method_key && a.rep_index == b.rep_index && a.effect_estimate == b.effect_estimate &&
         a.effect_se == b.effect_se && a.reject == b.reject && a.converged == b.converged;
}

bool same(const std::optional<double>& a, const std::optional<double>& b) {
  return a.has_value() == b.has_value() && (!a || *a == *b);
}

ScenarioConfig small_scenario(const std::string& id, EffectKind kind = EffectKind::None) {
  ScenarioConfig c;
  c.id = id;
  c.n_per_site = 50;
  c.effect = {kind, kind == EffectKind::None ? 0.0 : -1.5};
  c.cohort.size = 5000;
  c.cohort.seed = 77;
  return c;
}

}  // namespace

TEST_CASE("true effect at 12 months") {
  CHECK(true_effect_at_12({EffectKind::Ramp, -1.5}) == doctest::Approx(-1.5));
  CHECK(true_effect_at_12({EffectKind::None, 0.0}) == 0.0);
  CHECK(true_effect_at_12({EffectKind::Constant, -1.5}) == -1.5);
}

TEST_CASE("summaries") {
  EstimandRef truth;
  truth.value = -1.5;
  auto s = summarize({result(-1.0, 0.3, true), result(-2.0, 0.5, true)}, truth);
  CHECK(s.n_reps == 2);
  CHECK(s.n_converged == 2);
  CHECK(*s.bias == doctest::Approx(0.0));
  CHECK(*s.empirical_se == doctest::Approx(0.7071).epsilon(1e-4));
  CHECK(*s.median_model_se == doctest::Approx(0.4));
  CHECK(*s.rejection_rate == 1.0);

  std::vector<ReplicateResult> same_ci(5, result(-1.5, 0.5 / 1.96, true));
  CHECK(*summarize(same_ci, truth).coverage == 1.0);

  EstimandRef absent;
  s = summarize(same_ci, absent);
  CHECK(!s.coverage);
  CHECK(!s.bias);
  CHECK(s.rejection_rate);

  s = summarize({result(1.0, 1.0, false, false), result(2.0, 1.0, false, false)}, truth);
  CHECK(s.n_reps == 2);
  CHECK(s.n_converged == 0);
  CHECK(!s.mean_estimate);
  CHECK(!s.rejection_rate);

  s = summarize({result(1.0, 1.0, false), result(2.0, 1.0, true, false), result(3.0, 1.0, true)}, truth);
  CHECK(s.n_converged == 2);
  CHECK(*s.mean_estimate == 2.0);
  CHECK(*s.rejection_rate == 0.5);
  CHECK(*s.mc_se_rejection == doctest::Approx(std::sqrt(0.25 / 2)));
}

TEST_CASE("a nominal test rejects at its level over 1000 replicates") {
  const ScenarioConfig c = small_scenario("null");
  const auto& cohort = testing::small_cohort();
  const std::vector<ModelSpec> ms = {
      method("closest_splines", Selection::ClosestTo12, Engine::OlsSandwich, TimeAdjust::Splines3, EffectModel::Constant)};
  std::vector<ReplicateResult> all;
  ScenarioConfig big = c;
  big.n_per_site = 200;
  for (int rep = 0; rep < 1000; ++rep) {
    auto r = run_replicate(big, ms, cohort, rep, 42);
    all.insert(all.end(), r.begin(), r.end());
  }
  EstimandRef truth;
  truth.value = 0.0;
  const auto s = summarize(all, truth);
  CHECK(s.n_converged == 1000);
  CHECK(std::abs(*s.rejection_rate - 0.05) <= 3.0 * std::sqrt(0.05 * 0.95 / 1000));
}

TEST_CASE("replicates are deterministic and isolated per method") {
  const ScenarioConfig c = small_scenario("iso", EffectKind::Ramp);
  const auto& cohort = testing::small_cohort();
  std::vector<ModelSpec> ms = {
      method("random", Selection::Random, Engine::OlsSandwich, TimeAdjust::Splines3, EffectModel::Constant),
      method("closest", Selection::ClosestTo12, Engine::OlsSandwich, TimeAdjust::Linear, EffectModel::Constant),
      method("wgee", Selection::All, Engine::Wgee, TimeAdjust::Splines3, EffectModel::TimeVarying),
      method("random2", Selection::Random, Engine::OlsSandwich, TimeAdjust::None, EffectModel::Constant),
      method("lmm", Selection::All, Engine::LmmExchangeable, TimeAdjust::Splines3, EffectModel::Constant)};
  const auto a = run_replicate(c, ms, cohort, 3, 9);
  const auto b = run_replicate(c, ms, cohort, 3, 9);
  REQUIRE(a.size() == ms.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(same(a[i], b[i]));

  std::vector<ModelSpec> reversed(ms.rbegin(), ms.rend());
  const auto r = run_replicate(c, reversed, cohort, 3, 9);
  for (const auto& x : a) {
    const auto it = std::find_if(r.begin(), r.end(), [&](const auto& y) { return y.method_key == x.method_key; });
    REQUIRE(it != r.end());
    CHECK(same(x, *it));
  }
  // A single method alone gets the same draws as inside the full list.
  const auto solo = run_replicate(c, {ms[0]}, cohort, 3, 9);
  CHECK(same(solo[0], a[0]));

  const auto other = run_replicate(c, ms, cohort, 4, 9);
  CHECK(other[0].effect_estimate != a[0].effect_estimate);
}

TEST_CASE("best score is biased downward under optimal follow-up") {
  ScenarioConfig c = small_scenario("best");
  c.follow_up = FollowUp::Optimal;
  c.n_per_site = 400;
  const auto& cohort = testing::small_cohort();
  const std::vector<ModelSpec> ms = {
      method("best", Selection::Best, Engine::OlsSandwich, TimeAdjust::None, EffectModel::Constant)};
  int negative = 0;
  for (int rep = 0; rep < 20; ++rep) negative += run_replicate(c, ms, cohort, rep, 5)[0].effect_estimate < 0.0;
  CHECK(negative >= 19);
}

TEST_CASE("grid output does not depend on the thread count") {
  const std::vector<ScenarioConfig> sc = {small_scenario("b_scn"), small_scenario("a_scn", EffectKind::Constant)};
  const std::vector<ModelSpec> ms = {
      method("z_lmm", Selection::All, Engine::LmmCar1, TimeAdjust::Splines3, EffectModel::TimeVarying),
      method("a_random", Selection::Random, Engine::OlsSandwich, TimeAdjust::Splines3, EffectModel::Constant)};
  GridOptions o;
  o.reps = 3;
  o.threads = 1;
  CohortCache cache;
  const auto one = run_grid(sc, ms, o, &cache);
  o.threads = 8;
  const auto eight = run_grid(sc, ms, o, &cache);
  REQUIRE(one.size() == 4);
  REQUIRE(eight.size() == 4);
  CHECK(one[0].scenario_id == "a_scn");
  CHECK(one[0].method_key == "a_random");
  CHECK(one[3].scenario_id == "b_scn");
  CHECK(one[3].method_key == "z_lmm");
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].n_converged == eight[i].n_converged);
    CHECK(same(one[i].mean_estimate, eight[i].mean_estimate));
    CHECK(same(one[i].empirical_se, eight[i].empirical_se));
    CHECK(same(one[i].median_model_se, eight[i].median_model_se));
    CHECK(same(one[i].coverage, eight[i].coverage));
    CHECK(same(one[i].rejection_rate, eight[i].rejection_rate));
  }
}

TEST_CASE("empty grids and failing cells") {
  GridOptions o;
  o.reps = 2;
  CHECK(run_grid({}, {method("r", Selection::Random, Engine::OlsSandwich, TimeAdjust::None, EffectModel::Constant)}, o)
            .empty());

  ScenarioConfig broken = small_scenario("broken");
  broken.cohort.path = "/nonexistent/cohort.json";
  const std::vector<ModelSpec> ms = {
      method("r", Selection::Random, Engine::OlsSandwich, TimeAdjust::None, EffectModel::Constant)};
  const auto out = run_grid({broken, small_scenario("fine")}, ms, o);
  REQUIRE(out.size() == 2);
  CHECK(out[0].scenario_id == "broken");
  CHECK(!out[0].error.empty());
  CHECK(out[1].error.empty());
  CHECK(out[1].n_converged == 2);
}

TEST_CASE("estimand resolution") {
  const auto& cohort = testing::small_cohort();
  OracleSettings oracle;
  const auto lmm_const = method("lmm", Selection::All, Engine::LmmExponential, TimeAdjust::Splines3, EffectModel::Constant);
  const auto lmm_tv = method("lmm_tv", Selection::All, Engine::LmmExponential, TimeAdjust::Splines3, EffectModel::TimeVarying);
  const auto mean = method("mean", Selection::Mean, Engine::OlsSandwich, TimeAdjust::None, EffectModel::Constant);

  auto e = resolve_estimand(small_scenario("c", EffectKind::Constant), lmm_const, cohort, oracle);
  CHECK(e.kind == EstimandRefKind::ConstantEffect);
  CHECK(*e.value == -1.5);
  e = resolve_estimand(small_scenario("n"), lmm_tv, cohort, oracle);
  CHECK(e.kind == EstimandRefKind::EffectAt12);
  CHECK(*e.value == 0.0);
  e = resolve_estimand(small_scenario("r", EffectKind::Ramp), lmm_tv, cohort, oracle);
  CHECK(*e.value == doctest::Approx(-1.5));
  e = resolve_estimand(small_scenario("r", EffectKind::Ramp), lmm_const, cohort, oracle);
  CHECK(e.kind == EstimandRefKind::ConstantPlim);
  CHECK(e.method_key == "lmm");
  CHECK(!e.value);
  CHECK(!resolve_estimand(small_scenario("r", EffectKind::Ramp), mean, cohort, oracle).value);
}

TEST_CASE("oracle enforces its minimum size") {
  const auto m = method("closest", Selection::ClosestTo12, Engine::OlsSandwich, TimeAdjust::None, EffectModel::Constant);
  const auto c = small_scenario("r", EffectKind::Ramp);
  CHECK_THROWS_AS(oracle_constant_plim(c, m, testing::small_cohort(), kOracleMinN - 2, kOracleMinReps, 1), Error);
  CHECK_THROWS_AS(oracle_constant_plim(c, m, testing::small_cohort(), kOracleMinN, kOracleMinReps - 1, 1), Error);
  auto tv = m;
  tv.effect_model = EffectModel::TimeVarying;
  tv.time_adjust = TimeAdjust::Splines3;
  CHECK_THROWS_AS(oracle_constant_plim(c, tv, testing::small_cohort(), kOracleMinN, kOracleMinReps, 1), Error);
}

TEST_CASE("oracle recovers a constant effect and orders the ramp attenuation") {
  const std::vector<ModelSpec> ms = {
      method("random", Selection::Random, Engine::OlsSandwich, TimeAdjust::None, EffectModel::Constant),
      method("closest", Selection::ClosestTo12, Engine::OlsSandwich, TimeAdjust::None, EffectModel::Constant)};
  const auto& cohort = testing::small_cohort();

  const auto constant = oracle_constant_plim(small_scenario("c", EffectKind::Constant), ms, cohort, kOracleMinN,
                                             kOracleMinReps, 11, 2);
  for (const auto& p : constant) {
    CHECK(p.n_used == kOracleMinReps);
    CHECK(std::abs(p.value + 1.5) < 3.0 * p.mc_se);
  }

  const auto ramp = oracle_constant_plim(small_scenario("r", EffectKind::Ramp), ms, cohort, kOracleMinN,
                                         kOracleMinReps, 12, 2);
  CHECK(ramp[1].value < 0.0);
  CHECK(ramp[1].value > -1.5);
  CHECK(std::abs(ramp[0].value) < std::abs(ramp[1].value));
  CHECK(ramp[0].value < 0.0);

  // The single-method overload gives the same value.
  const auto solo = oracle_constant_plim(small_scenario("r", EffectKind::Ramp), ms[1], cohort, kOracleMinN,
                                         kOracleMinReps, 12);
  CHECK(solo.value == ramp[1].value);
}
