#include "pragsim/dgp.hpp"

#include <algorithm>
#include <sstream>

#include "pragsim/error.hpp"

namespace pragsim {

Eigen::MatrixXd CovarianceSpec::default_monthly_corr(double decay) {
  Eigen::MatrixXd c(kMonthBuckets, kMonthBuckets);
  for (int i = 0; i < kMonthBuckets; ++i)
    for (int j = 0; j < kMonthBuckets; ++j) c(i, j) = std::pow(decay, std::abs(i - j));
  return c;
}

void validate(const CovarianceSpec& s) {
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!finite_nonneg(s.sigma_b2)) throw Error("covariance: sigma_b2 must be finite and >= 0");
  switch (s.kind) {
    case CovKind::Exchangeable:
      if (!(s.sigma2 > 0.0 && std::isfinite(s.sigma2))) throw Error("covariance: sigma2 must be > 0");
      break;
    case CovKind::CAR1:
      if (!(s.sigma2 > 0.0 && std::isfinite(s.sigma2))) throw Error("covariance: sigma2 must be > 0");
      if (!(s.rho > 0.0 && s.rho < 1.0)) throw Error("covariance: rho must lie in (0, 1)");
      break;
    case CovKind::Exponential:
      if (!(s.sigma2 > 0.0 && std::isfinite(s.sigma2))) throw Error("covariance: sigma2 must be > 0");
      if (!(s.range > 0.0 && std::isfinite(s.range))) throw Error("covariance: range must be > 0");
      break;
    case CovKind::Unstructured: {
      if (!finite_nonneg(s.sigma_u2)) throw Error("covariance: sigma_u2 must be finite and >= 0");
      if (!(s.sigma_e2 > 0.0 && std::isfinite(s.sigma_e2))) throw Error("covariance: sigma_e2 must be > 0");
      const auto& c = s.monthly_corr;
      if (c.rows() != kMonthBuckets || c.cols() != kMonthBuckets)
        throw Error("covariance: monthly_corr must be 10 x 10");
      if (!c.allFinite()) throw Error("covariance: monthly_corr has non-finite entries");
      if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw Error("covariance: monthly_corr is not symmetric");
      if ((c.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12)
        throw Error("covariance: monthly_corr must have a unit diagonal");
      Eigen::LLT<Eigen::MatrixXd> llt(c);
      if (llt.info() != Eigen::Success) throw Error("covariance: monthly_corr is not positive definite");
      break;
    }
  }
}

std::string CohortRef::key() const {
  if (!path.empty()) return "file:" + path;
  return "gen:" + std::to_string(size) + ":" + std::to_string(seed);
}

void validate(const ScenarioConfig& c) {
  if (c.n_per_site < 1) throw Error("scenario " + c.id + ": n_per_site must be >= 1");
  if (c.n_per_site % 2 != 0) throw Error("scenario " + c.id + ": n_per_site must be even");
  if (c.sites < 1 || c.sites > 2) throw Error("scenario " + c.id + ": sites must be 1 or 2");
  const auto& m = c.realistic_mix;
  if (m.p_optimal < 0 || m.p_first_month < 0 || m.p_usual < 0 ||
      std::abs(m.p_optimal + m.p_first_month + m.p_usual - 1.0) > 1e-9)
    throw Error("scenario " + c.id + ": realistic_mix must be non-negative and sum to 1");
  if (c.trend.kind == TrendKind::None && (c.trend.a != 0.0 || c.trend.b != 0.0))
    throw Error("scenario " + c.id + ": trend kind none requires a = b = 0");
  if (c.trend.kind == TrendKind::Linear && c.trend.b != 0.0)
    throw Error("scenario " + c.id + ": linear trend requires b = 0");
  if (c.effect.kind == EffectKind::None && c.effect.delta12 != 0.0)
    throw Error("scenario " + c.id + ": effect kind none requires delta12 = 0");
  const auto& b = c.baseline;
  if (!(b.sd > 0.0) || !(b.low < b.high)) throw Error("scenario " + c.id + ": invalid baseline distribution");
  validate(c.covariance);
}

std::vector<Assignment> randomize(int n_per_site, int sites, Rng& rng) {
  if (n_per_site < 1 || n_per_site % 2 != 0) throw Error("randomize: n_per_site must be positive and even");
  if (sites < 1) throw Error("randomize: sites must be >= 1");
  std::vector<Assignment> out;
  out.reserve(static_cast<std::size_t>(n_per_site) * sites);
  std::vector<int> arms(static_cast<std::size_t>(n_per_site));
  for (int s = 0; s < sites; ++s) {
    for (int i = 0; i < n_per_site; ++i) arms[i] = i < n_per_site / 2 ? 1 : 0;
    std::shuffle(arms.begin(), arms.end(), rng);
    for (int a : arms) out.push_back({s, a});
  }
  return out;
}

double trend_value(const TrendSpec& trend, double t) {
  const double d = t - 3.0;
  return trend.a * d + trend.b * d * d;
}

double effect_value(const EffectSpec& effect, double t) {
  switch (effect.kind) {
    case EffectKind::None:
      return 0.0;
    case EffectKind::Constant:
      return effect.delta12;
    case EffectKind::Ramp:
      return effect.delta12 * std::clamp((t - 3.0) / 9.0, 0.0, 1.0);
  }
  return 0.0;
}

namespace {

// One time uniform in each month [3,4), ..., [12,13).
std::vector<double> optimal_schedule(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> t(kMonthBuckets);
  for (int m = 0; m < kMonthBuckets; ++m) t[m] = 3.0 + m + u(rng);
  return t;
}

}  // namespace

std::vector<double> generate_schedule(int arm, const ScenarioConfig& config, const Cohort& cohort, Rng& rng) {
  if (arm == 0) return resample_schedule(cohort, rng);
  if (config.follow_up == FollowUp::Optimal) return optimal_schedule(rng);

  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double draw = u(rng);
  const auto& mix = config.realistic_mix;
  if (draw < mix.p_optimal) return optimal_schedule(rng);
  if (draw < mix.p_optimal + mix.p_first_month) {
    std::vector<double> t{3.0 + u(rng)};
    for (double v : resample_schedule(cohort, rng))
      if (v >= 4.0) t.push_back(v);
    return t;
  }
  return resample_schedule(cohort, rng);
}

Eigen::MatrixXd marginal_covariance(const CovarianceSpec& spec, const std::vector<double>& times) {
  const auto n = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd v = Eigen::MatrixXd::Constant(n, n, spec.sigma_b2);
  switch (spec.kind) {
    case CovKind::Exchangeable:
      v.diagonal().array() += spec.sigma2;
      break;
    case CovKind::CAR1:
    case CovKind::Exponential: {
      const double log_rho = spec.kind == CovKind::CAR1 ? std::log(spec.rho) : -1.0 / spec.range;
      for (Eigen::Index j = 0; j < n; ++j) {
        v(j, j) += spec.sigma2;
        for (Eigen::Index k = j + 1; k < n; ++k) {
          const double c = spec.sigma2 * std::exp(log_rho * std::abs(times[j] - times[k]));
          v(j, k) += c;
          v(k, j) += c;
        }
      }
      break;
    }
    case CovKind::Unstructured:
      for (Eigen::Index j = 0; j < n; ++j) {
        const int mj = month_bucket(times[j]);
        for (Eigen::Index k = 0; k < n; ++k) v(j, k) += spec.sigma_u2 * spec.monthly_corr(mj, month_bucket(times[k]));
        v(j, j) += spec.sigma_e2;
      }
      break;
  }
  return v;
}

double mean_outcome(const ScenarioConfig& c, int site, int arm, double baseline, double t) {
  return c.alpha + trend_value(c.trend, t) + c.beta1 * baseline + c.beta2 * site + effect_value(c.effect, t) * arm;
}

double draw_baseline(const BaselineDist& dist, Rng& rng) {
  std::normal_distribution<double> n(dist.mean, dist.sd);
  for (;;) {
    const double v = n(rng);
    if (v >= dist.low && v <= dist.high) return v;
  }
}

TrialDataset generate_trial(const ScenarioConfig& config, const Cohort& cohort, Rng& rng) {
  const auto assignments = randomize(config.n_per_site, config.sites, rng);
  TrialDataset ds;
  ds.n_participants = static_cast<int>(assignments.size());
  ds.rows.reserve(assignments.size() * 5);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd e;

  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const auto [site, arm] = assignments[i];
    const double baseline = draw_baseline(config.baseline, rng);
    const auto times = generate_schedule(arm, config, cohort, rng);
    const auto n = static_cast<Eigen::Index>(times.size());

    const Eigen::MatrixXd v = marginal_covariance(config.covariance, times);
    Eigen::LLT<Eigen::MatrixXd> llt(v);
    if (llt.info() != Eigen::Success) {
      std::ostringstream os;
      os << "covariance factorization failed for person " << i << " (" << n << " scores) in scenario " << config.id;
      throw FactorizationError(os.str());
    }
    e.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) e[j] = z(rng);
    const Eigen::VectorXd noise = llt.matrixL() * e;
    for (Eigen::Index j = 0; j < n; ++j) {
      ObservationRow row;
      row.person_id = static_cast<int>(i);
      row.site = site;
      row.arm = arm;
      row.baseline = baseline;
      row.t = times[j];
      row.y = mean_outcome(config, site, arm, baseline, times[j]) + noise[j];
      ds.rows.push_back(row);
    }
  }
  return ds;
}

}  // namespace pragsim
