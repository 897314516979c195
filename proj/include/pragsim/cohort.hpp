#pragma once
// Synthetic usual-care cohort: assessment schedules whose marginals match the
// published retrospective-cohort summaries, and plasmode resampling from it.

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "pragsim/rng.hpp"

namespace pragsim {

inline constexpr double kDaysPerMonth = 30.4375;
inline constexpr int kFirstDay = 92;   // first day with t >= 3 months
inline constexpr int kLastDay = 395;   // last day with t <= 13 months
inline constexpr int kMaxScores = 40;
inline constexpr int kMonthBuckets = 10;  // months 3..12

inline double day_to_month(int day) { return day / kDaysPerMonth; }

/// Month bucket index 0..9 for t in [3, 13] (bucket of month min(floor(t), 12)).
int month_bucket(double t);

class CohortParticipant {
 public:
  /// Validates: 1..40 days, strictly increasing, each in [92, 395].
  explicit CohortParticipant(std::vector<int> days);

  const std::vector<int>& days() const { return days_; }
  const std::vector<double>& follow_up_times() const { return times_; }
  int count() const { return static_cast<int>(days_.size()); }

 private:
  std::vector<int> days_;
  std::vector<double> times_;
};

class Cohort {
 public:
  explicit Cohort(std::vector<CohortParticipant> participants);

  const std::vector<CohortParticipant>& participants() const { return participants_; }
  int size() const { return static_cast<int>(participants_.size()); }

  /// JSON array of participants, each an array of integer days.
  void save_json(const std::filesystem::path& path) const;
  static Cohort load_json(const std::filesystem::path& path);

 private:
  std::vector<CohortParticipant> participants_;
};

/// Published summaries of the usual-care assessment process. The realistic_*
/// fields describe the intervention arm under the realistic follow-up mix and
/// are optional calibration targets (NaN disables them).
struct CohortTargets {
  double p_single = 0.0;
  double p_ge5 = 0.0;
  double mean_count = 0.0;
  double sd_count = 0.0;
  double p_month12 = 0.0;
  double p_window_10_13 = 0.0;
  int max_count = kMaxScores;
  double realistic_mean = std::numeric_limits<double>::quiet_NaN();
  double realistic_sd = std::numeric_limits<double>::quiet_NaN();
};

CohortTargets default_targets();

/// Parameters of the schedule generator.
///
/// Count: with probability p_one a single score; with probability p_heavy a
/// count uniform on [heavy_low, 40]; otherwise 2 + NB(nb_mean, nb_size),
/// capped at 40. Timing: each score's month bucket m (0..9 for months 3..12)
/// has probability proportional to exp(-month_decay * m), with the last
/// bucket multiplied by month12_inflation; the day is uniform in the bucket
/// and same-day duplicates are redrawn.
struct CohortGenParams {
  double p_one = 0.38;
  double p_heavy = 0.012;
  double nb_mean = 2.15;
  double nb_size = 50.0;
  double month_decay = 0.045;
  double month12_inflation = 1.0;
  int heavy_low = 30;
};

/// Exact law of the count (index = count, entry 0 unused).
std::array<double, kMaxScores + 1> count_pmf(const CohortGenParams& params);
/// Month bucket probabilities, months 3..12.
std::array<double, kMonthBuckets> month_probs(const CohortGenParams& params);

/// Mixing weights of the intervention arm's realistic follow-up scenario.
struct RealisticMix {
  double p_optimal = 0.20;
  double p_first_month = 0.60;
  double p_usual = 0.20;
};

/// Target statistics implied by the generator's law (same-day redraws
/// ignored). realistic_* use the default RealisticMix.
CohortTargets expected_summary(const CohortGenParams& params,
                               const RealisticMix& mix = RealisticMix{});

/// Tolerances used to judge calibration (and the acceptance check).
struct CalibrationTolerances {
  double p_single = 0.02;
  double p_ge5 = 0.02;
  double mean_count = 0.15;
  double sd_count = 0.3;
  double p_month12 = 0.02;
  double p_window_10_13 = 0.03;
  double realistic_mean = 0.2;
  double realistic_sd = 0.3;
};

struct CalibrationResult {
  CohortGenParams params;
  CohortTargets achieved;
  /// Largest |achieved - target| / tolerance over the active targets.
  double worst_ratio = 0.0;
  /// False when some target misses by more than twice its tolerance.
  bool ok = true;
};

/// Fits CohortGenParams to `targets` by coordinate search. Never throws on
/// poor fit; inspect `ok` and `achieved`. The seed only affects the order in
/// which coordinates are visited.
CalibrationResult calibrate_generator(const CohortTargets& targets, std::uint64_t seed = 1,
                                      const CalibrationTolerances& tol = {});

/// Calibration to default_targets(); computed once and cached.
const CohortGenParams& default_generator_params();

/// One schedule from the generator.
std::vector<int> draw_schedule_days(const CohortGenParams& params, Rng& rng);

Cohort generate_cohort(const CohortGenParams& params, int size, std::uint64_t seed);

/// Plasmode draw: one participant uniformly with replacement, whole schedule.
const std::vector<double>& resample_schedule(const Cohort& cohort, Rng& rng);

CohortTargets summarize_cohort(const Cohort& cohort);

}  // namespace pragsim
