#pragma once
// Data-generating process for one simulated trial.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pragsim/cohort.hpp"
#include "pragsim/rng.hpp"

namespace pragsim {

enum class TrendKind { None, Linear, Quadratic };

/// Usual-care outcome trend a*(t - 3) + b*(t - 3)^2, anchored at t = 3.
struct TrendSpec {
  TrendKind kind = TrendKind::None;
  double a = 0.0;
  double b = 0.0;

  static TrendSpec none() { return {}; }
  static TrendSpec small_linear() { return {TrendKind::Linear, -0.05, 0.0}; }
  static TrendSpec large_linear() { return {TrendKind::Linear, -0.2, 0.0}; }
  static TrendSpec quadratic() { return {TrendKind::Quadratic, -0.30, 0.018}; }
};

enum class EffectKind { None, Constant, Ramp };

/// Intervention effect over time. Ramp rises linearly from 0 at t = 3 to
/// delta12 at t = 12 and stays flat afterwards.
struct EffectSpec {
  EffectKind kind = EffectKind::None;
  double delta12 = 0.0;
};

enum class CovKind { Exchangeable, CAR1, Exponential, Unstructured };

struct CovarianceSpec {
  CovKind kind = CovKind::Exponential;
  double sigma_b2 = 9.0;
  double sigma2 = 16.0;
  double rho = std::exp(-1.0 / 3.0);
  double range = 3.0;
  Eigen::MatrixXd monthly_corr;  // Unstructured only; 10 x 10
  double sigma_u2 = 12.0;
  double sigma_e2 = 4.0;

  /// corr(m, m') = decay^|m - m'| over the 10 month buckets.
  static Eigen::MatrixXd default_monthly_corr(double decay = 0.8);
};

/// Throws Error when the spec violates its invariants (e.g. monthly_corr not
/// symmetric positive definite with unit diagonal).
void validate(const CovarianceSpec& spec);

enum class FollowUp { Optimal, Realistic };

struct BaselineDist {
  double mean = 14.0;
  double sd = 4.0;
  double low = 10.0;
  double high = 27.0;
};

/// Where the usual-care cohort comes from: a JSON file, or the calibrated
/// generator with the given size and seed.
struct CohortRef {
  std::string path;
  int size = 20000;
  std::uint64_t seed = 20240723;

  std::string key() const;
};

struct ScenarioConfig {
  std::string id = "scenario";
  int n_per_site = 400;
  int sites = 2;
  FollowUp follow_up = FollowUp::Realistic;
  RealisticMix realistic_mix;
  TrendSpec trend;
  EffectSpec effect;
  CovarianceSpec covariance;
  double alpha = 0.0;
  double beta1 = -0.5;
  double beta2 = 0.3;
  BaselineDist baseline;
  CohortRef cohort;
};

void validate(const ScenarioConfig& config);

struct ObservationRow {
  int person_id = 0;
  int site = 0;
  int arm = 0;
  double baseline = 0.0;
  double t = 0.0;
  double y = 0.0;
};

struct TrialDataset {
  std::vector<ObservationRow> rows;  // sorted by (person_id, t)
  int n_participants = 0;
};

struct Assignment {
  int site;
  int arm;
};

/// Stratified 1:1 randomization; participants are listed site by site.
/// Throws when n_per_site is odd.
std::vector<Assignment> randomize(int n_per_site, int sites, Rng& rng);

double trend_value(const TrendSpec& trend, double t);
double effect_value(const EffectSpec& effect, double t);

/// Follow-up times for one participant in the given arm.
std::vector<double> generate_schedule(int arm, const ScenarioConfig& config, const Cohort& cohort, Rng& rng);

Eigen::MatrixXd marginal_covariance(const CovarianceSpec& spec, const std::vector<double>& times);

/// Outcome mean for one observation.
double mean_outcome(const ScenarioConfig& config, int site, int arm, double baseline, double t);

double draw_baseline(const BaselineDist& dist, Rng& rng);

TrialDataset generate_trial(const ScenarioConfig& config, const Cohort& cohort, Rng& rng);

}  // namespace pragsim
