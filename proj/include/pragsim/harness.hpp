#pragma once
// Replicated simulation over scenario x method grids and aggregation of the
// operating characteristics (bias, SEs, coverage, rejection rate).

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pragsim/cohort.hpp"
#include "pragsim/dgp.hpp"
#include "pragsim/estimators.hpp"

namespace pragsim {

enum class EstimandRefKind { EffectAt12, ConstantEffect, ConstantPlim };

/// What a method's estimates are compared against. `value` is absent when
/// the estimand is not computed (e.g. all-scores constant-effect models under
/// a time-varying effect).
struct EstimandRef {
  EstimandRefKind kind = EstimandRefKind::ConstantEffect;
  std::string method_key;
  std::optional<double> value;
  std::optional<double> mc_se;  // Monte Carlo SE of an oracle value
};

struct ReplicateResult {
  std::string scenario_id;
  std::string method_key;
  int rep_index = 0;
  double effect_estimate = 0.0;
  double effect_se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool reject = false;
  bool converged = false;
  std::string message;
};

struct ScenarioSummary {
  std::string scenario_id;
  std::string method_key;
  ModelSpec method;
  EstimandRef estimand;
  int n_reps = 0;
  int n_converged = 0;
  std::optional<double> mean_estimate;
  std::optional<double> bias;
  std::optional<double> empirical_se;
  std::optional<double> median_model_se;
  std::optional<double> coverage;
  std::optional<double> rejection_rate;
  std::optional<double> mc_se_rejection;
  std::string error;  // set when the whole cell failed
};

double true_effect_at_12(const EffectSpec& effect);

struct PlimEstimate {
  double value = 0.0;
  double mc_se = 0.0;
  int n_used = 0;  // converged fits
};

inline constexpr int kOracleMinN = 20000;
inline constexpr int kOracleMinReps = 100;

/// Monte Carlo probability limit of constant-effect estimators: the mean of
/// k_reps estimates on datasets of n_big participants. All methods share the
/// same oracle datasets. Throws Error below the minimum n_big / k_reps, or
/// for methods that do not fit a constant effect.
std::vector<PlimEstimate> oracle_constant_plim(const ScenarioConfig& scenario, const std::vector<ModelSpec>& methods,
                                               const Cohort& cohort, int n_big, int k_reps, std::uint64_t seed,
                                               int threads = 1);
PlimEstimate oracle_constant_plim(const ScenarioConfig& scenario, const ModelSpec& method, const Cohort& cohort,
                                  int n_big, int k_reps, std::uint64_t seed);

/// One dataset from the replicate's own stream; each method then draws any
/// selection randomness from a stream keyed by its method key. A generation
/// failure marks every method as failed with the diagnostic.
std::vector<ReplicateResult> run_replicate(const ScenarioConfig& scenario, const std::vector<ModelSpec>& methods,
                                           const Cohort& cohort, int rep_index, std::uint64_t base_seed);

/// Aggregates replicate results. Statistics other than the counts need at
/// least two converged replicates and are absent otherwise.
ScenarioSummary summarize(const std::vector<ReplicateResult>& results, const EstimandRef& estimand);

struct OracleSettings {
  int n_big = kOracleMinN;
  int k_reps = kOracleMinReps;
  std::uint64_t seed = 0x5eed0dd;
  /// Compute the plim for all-scores constant-effect models too (default:
  /// leave their estimand absent).
  bool all_scores = false;
};

struct GridOptions {
  int reps = 1000;
  int threads = 1;
  std::uint64_t base_seed = 1;
  OracleSettings oracle;
};

/// Estimand for a method under a scenario; runs the oracle when required.
EstimandRef resolve_estimand(const ScenarioConfig& scenario, const ModelSpec& method, const Cohort& cohort,
                             const OracleSettings& oracle, int threads = 1);

/// Loads (or generates) cohorts and caches them by CohortRef::key().
class CohortCache {
 public:
  std::shared_ptr<const Cohort> get(const CohortRef& ref);

 private:
  std::vector<std::pair<std::string, std::shared_ptr<const Cohort>>> entries_;
};

/// Full cross product, replicates run in parallel. Output is sorted by
/// (scenario_id, method_key) and does not depend on `threads`.
std::vector<ScenarioSummary> run_grid(const std::vector<ScenarioConfig>& scenarios,
                                      const std::vector<ModelSpec>& methods, const GridOptions& options,
                                      CohortCache* cache = nullptr);

}  // namespace pragsim
