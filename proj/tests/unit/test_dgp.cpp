#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "pragsim/dgp.hpp"
#include "pragsim/error.hpp"

using namespace pragsim;

TEST_CASE("randomization is balanced within each site") {
  Rng rng(1);
  const auto a = randomize(400, 2, rng);
  REQUIRE(a.size() == 800);
  int count[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].site == (i < 400 ? 0 : 1));
    ++count[a[i].site][a[i].arm];
  }
  for (auto& site : count) {
    CHECK(site[0] == 200);
    CHECK(site[1] == 200);
  }
  const auto b = randomize(2, 1, rng);
  CHECK(b[0].arm + b[1].arm == 1);
  CHECK_THROWS_AS(randomize(3, 1, rng), Error);
}

TEST_CASE("trend and effect shapes") {
  CHECK(trend_value(TrendSpec::small_linear(), 3.0) == 0.0);
  CHECK(trend_value(TrendSpec::large_linear(), 13.0) == doctest::Approx(-2.0));
  CHECK(trend_value(TrendSpec::quadratic(), 8.0) == doctest::Approx(-1.05));
  const EffectSpec constant{EffectKind::Constant, -1.5};
  const EffectSpec ramp{EffectKind::Ramp, -1.5};
  CHECK(effect_value(constant, 7.4) == -1.5);
  CHECK(effect_value(ramp, 12.0) == doctest::Approx(-1.5));
  CHECK(effect_value(ramp, 3.0) == 0.0);
  CHECK(effect_value(ramp, 7.5) == doctest::Approx(-0.75));
  CHECK(effect_value(ramp, 12.9) == doctest::Approx(-1.5));
  CHECK(effect_value(EffectSpec{}, 9.0) == 0.0);
}

TEST_CASE("optimal schedules have one score in every month") {
  ScenarioConfig c;
  c.follow_up = FollowUp::Optimal;
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto t = generate_schedule(1, c, testing::small_cohort(), rng);
    REQUIRE(t.size() == 10);
    for (int m = 0; m < 10; ++m) {
      CHECK(t[m] >= 3.0 + m);
      CHECK(t[m] < 4.0 + m);
    }
  }
}

TEST_CASE("usual care delegates to plasmode resampling") {
  ScenarioConfig c;
  Rng a(17), b(17);
  for (int i = 0; i < 100; ++i)
    CHECK(generate_schedule(0, c, testing::small_cohort(), a) == resample_schedule(testing::small_cohort(), b));
}

TEST_CASE("realistic schedules are sorted, unique and inside the window") {
  ScenarioConfig c;
  Rng rng(5);
  int first_month = 0;
  for (int i = 0; i < 5000; ++i) {
    const auto t = generate_schedule(1, c, testing::small_cohort(), rng);
    REQUIRE(!t.empty());
    for (std::size_t j = 0; j < t.size(); ++j) {
      CHECK(t[j] >= 3.0);
      CHECK(t[j] <= 13.0);
      if (j > 0) CHECK(t[j] > t[j - 1]);
    }
    first_month += t.front() < 4.0;
  }
  // Optimal and first-month groups always score in month 3; usual care only sometimes.
  CHECK(first_month > 0.8 * 5000);
}

TEST_CASE("marginal covariance closed forms") {
  CovarianceSpec s;
  s.kind = CovKind::Exchangeable;
  s.sigma_b2 = 1.0;
  s.sigma2 = 2.0;
  const Eigen::MatrixXd v = marginal_covariance(s, {3.0, 5.0});
  CHECK(v(0, 0) == 3.0);
  CHECK(v(1, 1) == 3.0);
  CHECK(v(0, 1) == 1.0);
  CHECK(v(1, 0) == 1.0);

  s.kind = CovKind::Exponential;
  s.sigma_b2 = 0.0;
  s.sigma2 = 1.0;
  s.range = 2.0;
  CHECK(marginal_covariance(s, {3.0, 5.0})(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("CAR1 with rho = exp(-1/range) equals the exponential structure") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(3.0, 13.0);
  for (double range : {0.5, 3.0, 11.0}) {
    std::vector<double> t(12);
    for (auto& x : t) x = u(rng);
    std::sort(t.begin(), t.end());
    CovarianceSpec e, c;
    e.kind = CovKind::Exponential;
    e.range = range;
    c.kind = CovKind::CAR1;
    c.rho = std::exp(-1.0 / range);
    CHECK((marginal_covariance(e, t) - marginal_covariance(c, t)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("unstructured covariance groups times by month") {
  CovarianceSpec s;
  s.kind = CovKind::Unstructured;
  s.sigma_b2 = 1.0;
  s.sigma_u2 = 2.0;
  s.sigma_e2 = 0.5;
  s.monthly_corr = CovarianceSpec::default_monthly_corr(0.8);
  validate(s);
  const Eigen::MatrixXd v = marginal_covariance(s, {3.2, 3.7, 5.5, 12.9});
  CHECK(v(0, 0) == doctest::Approx(1.0 + 2.0 + 0.5));
  CHECK(v(0, 1) == doctest::Approx(1.0 + 2.0));
  CHECK(v(0, 2) == doctest::Approx(1.0 + 2.0 * 0.64));
  CHECK(v(0, 3) == doctest::Approx(1.0 + 2.0 * std::pow(0.8, 9)));
  CHECK(v.llt().info() == Eigen::Success);

  s.monthly_corr(0, 1) = s.monthly_corr(1, 0) = -0.99;
  s.monthly_corr(1, 2) = s.monthly_corr(2, 1) = 0.99;
  s.monthly_corr(0, 2) = s.monthly_corr(2, 0) = 0.99;
  CHECK_THROWS_AS(validate(s), Error);
}

TEST_CASE("near-zero noise reproduces the mean model") {
  ScenarioConfig c;
  c.n_per_site = 20;
  c.covariance.kind = CovKind::Exchangeable;
  c.covariance.sigma_b2 = 0.0;
  c.covariance.sigma2 = 1e-8;
  c.trend = TrendSpec::quadratic();
  c.effect = {EffectKind::Ramp, -1.5};
  Rng rng(8);
  const TrialDataset d = generate_trial(c, testing::small_cohort(), rng);
  for (const auto& r : d.rows) CHECK(std::abs(r.y - mean_outcome(c, r.site, r.arm, r.baseline, r.t)) < 1e-3);
}

TEST_CASE("datasets are sorted, balanced and deterministic") {
  ScenarioConfig c;
  c.n_per_site = 100;
  Rng a(9), b(9);
  const TrialDataset d1 = generate_trial(c, testing::small_cohort(), a);
  const TrialDataset d2 = generate_trial(c, testing::small_cohort(), b);
  REQUIRE(d1.rows.size() == d2.rows.size());
  CHECK(d1.n_participants == 200);
  int arm1[2] = {0, 0};
  int last_id = -1;
  for (std::size_t i = 0; i < d1.rows.size(); ++i) {
    const auto& r = d1.rows[i];
    CHECK(r.y == d2.rows[i].y);
    CHECK(r.t == d2.rows[i].t);
    CHECK(r.baseline >= 10.0);
    CHECK(r.baseline <= 27.0);
    if (r.person_id != last_id) {
      CHECK(r.person_id == last_id + 1);
      arm1[r.site] += r.arm;
      last_id = r.person_id;
    } else {
      CHECK(r.t > d1.rows[i - 1].t);
    }
  }
  CHECK(last_id == 199);
  CHECK(arm1[0] == 50);
  CHECK(arm1[1] == 50);
}

TEST_CASE("generated outcomes match the first two moments") {
  ScenarioConfig c;
  c.n_per_site = 1000;
  Rng rng(10);
  const TrialDataset d = generate_trial(c, testing::small_cohort(), rng);
  double ss = 0.0, sum = 0.0;
  std::vector<double> person_sum(static_cast<std::size_t>(d.n_participants), 0.0);
  for (const auto& r : d.rows) {
    const double e = r.y - mean_outcome(c, r.site, r.arm, r.baseline, r.t);
    ss += e * e;
    sum += e;
    person_sum[static_cast<std::size_t>(r.person_id)] += e;
  }
  const double n = static_cast<double>(d.rows.size());
  const double total_var = c.covariance.sigma_b2 + c.covariance.sigma2;
  CHECK(std::abs(ss / n - total_var) < 0.05 * total_var);
  // The residual mean is zero within 3 cluster-robust Monte Carlo SEs.
  double cluster_ss = 0.0;
  for (double s : person_sum) cluster_ss += s * s;
  CHECK(std::abs(sum / n) < 3.0 * std::sqrt(cluster_ss) / n);
}

TEST_CASE("no effect, no trend: mean outcome matches the covariate part") {
  ScenarioConfig c;
  c.n_per_site = 1000;
  Rng rng(12);
  const TrialDataset d = generate_trial(c, testing::small_cohort(), rng);
  double ybar = 0.0, bbar = 0.0, sbar = 0.0;
  for (const auto& r : d.rows) {
    ybar += r.y;
    bbar += r.baseline;
    sbar += r.site;
  }
  const double n = static_cast<double>(d.rows.size());
  ybar /= n;
  bbar /= n;
  sbar /= n;
  const double target = c.alpha + c.beta1 * bbar + c.beta2 * sbar;
  std::vector<double> person(static_cast<std::size_t>(d.n_participants), 0.0);
  for (const auto& r : d.rows)
    person[static_cast<std::size_t>(r.person_id)] += r.y - (c.alpha + c.beta1 * r.baseline + c.beta2 * r.site);
  double cluster_ss = 0.0;
  for (double s : person) cluster_ss += s * s;
  CHECK(std::abs(ybar - target) < 3.0 * std::sqrt(cluster_ss) / n);
}

TEST_CASE("a covariance that cannot be factorized names the person and scenario") {
  ScenarioConfig c;
  c.id = "broken";
  c.n_per_site = 4;
  c.covariance.kind = CovKind::Exchangeable;
  c.covariance.sigma2 = -5.0;
  Rng rng(1);
  try {
    generate_trial(c, testing::small_cohort(), rng);
    FAIL("expected a factorization error");
  } catch (const FactorizationError& e) {
    const std::string what = e.what();
    CHECK(what.find("person 0") != std::string::npos);
    CHECK(what.find("broken") != std::string::npos);
  }
}

TEST_CASE("scenario validation") {
  ScenarioConfig c;
  validate(c);
  c.n_per_site = 3;
  CHECK_THROWS_AS(validate(c), Error);
  c = ScenarioConfig{};
  c.realistic_mix.p_usual = 0.1;
  CHECK_THROWS_AS(validate(c), Error);
  c = ScenarioConfig{};
  c.effect = {EffectKind::None, -1.0};
  CHECK_THROWS_AS(validate(c), Error);
  c = ScenarioConfig{};
  c.trend = {TrendKind::Linear, -0.1, 0.2};
  CHECK_THROWS_AS(validate(c), Error);
}
