#include "pragsim/cohort.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pragsim/error.hpp"

namespace pragsim {

namespace {

struct DayRange {
  int first;
  int last;
};

DayRange bucket_days(int bucket) {
  const int month = bucket + 3;
  const int first = std::max(kFirstDay, static_cast<int>(std::ceil(month * kDaysPerMonth)));
  const int last = std::min(kLastDay, static_cast<int>(std::ceil((month + 1) * kDaysPerMonth)) - 1);
  return {first, last};
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

int month_bucket(double t) {
  const int month = std::min(static_cast<int>(std::floor(t)), 12);
  return std::clamp(month - 3, 0, kMonthBuckets - 1);
}

CohortParticipant::CohortParticipant(std::vector<int> days) : days_(std::move(days)) {
  if (days_.empty() || static_cast<int>(days_.size()) > kMaxScores) {
    std::ostringstream os;
    os << "participant must have 1.." << kMaxScores << " follow-up scores, got " << days_.size();
    throw Error(os.str());
  }
  for (std::size_t i = 0; i < days_.size(); ++i) {
    if (days_[i] < kFirstDay || days_[i] > kLastDay)
      throw Error("follow-up day " + std::to_string(days_[i]) + " outside [92, 395]");
    if (i > 0 && days_[i] <= days_[i - 1]) throw Error("follow-up days must be strictly increasing");
  }
  times_.reserve(days_.size());
  for (int d : days_) times_.push_back(day_to_month(d));
}

Cohort::Cohort(std::vector<CohortParticipant> participants) : participants_(std::move(participants)) {
  if (participants_.empty()) throw Error("cohort must contain at least one participant");
}

void Cohort::save_json(const std::filesystem::path& path) const {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& p : participants_) doc.push_back(p.days());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << doc.dump() << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

Cohort Cohort::load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open cohort file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error("cohort file " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw Error("cohort file must hold an array of participants");
  std::vector<CohortParticipant> participants;
  participants.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& entry = doc[i];
    if (!entry.is_array()) throw Error("cohort participant " + std::to_string(i) + " is not an array");
    std::vector<int> days;
    for (const auto& d : entry) {
      if (!d.is_number_integer()) throw Error("cohort participant " + std::to_string(i) + ": days must be integers");
      days.push_back(d.get<int>());
    }
    try {
      participants.emplace_back(std::move(days));
    } catch (const Error& e) {
      throw Error("cohort participant " + std::to_string(i) + ": " + e.what());
    }
  }
  return Cohort(std::move(participants));
}

CohortTargets default_targets() {
  CohortTargets t;
  t.p_single = 0.369;
  t.p_ge5 = 0.245;
  t.mean_count = 3.2;
  t.sd_count = 3.89;
  t.p_month12 = 0.23;
  t.p_window_10_13 = 0.498;
  t.max_count = kMaxScores;
  t.realistic_mean = 4.9;
  t.realistic_sd = 4.33;
  return t;
}

std::array<double, kMaxScores + 1> count_pmf(const CohortGenParams& p) {
  std::array<double, kMaxScores + 1> pmf{};
  const double p_one = clamp01(p.p_one);
  const double p_heavy = std::clamp(p.p_heavy, 0.0, 1.0 - p_one);
  const double p_body = 1.0 - p_one - p_heavy;

  pmf[1] += p_one;
  const int heavy_low = std::clamp(p.heavy_low, 1, kMaxScores);
  const double heavy_each = p_heavy / (kMaxScores - heavy_low + 1);
  for (int n = heavy_low; n <= kMaxScores; ++n) pmf[n] += heavy_each;

  // Body: 2 + NB(mean, size), mass beyond the cap piled on the cap.
  const double k = p.nb_size;
  const double mu = p.nb_mean;
  const double log_q = std::log(k / (k + mu));
  const double log_r = std::log(mu / (k + mu));
  double used = 0.0;
  for (int j = 0; j + 2 < kMaxScores; ++j) {
    const double lp = std::lgamma(j + k) - std::lgamma(k) - std::lgamma(j + 1.0) + k * log_q + j * log_r;
    const double v = std::exp(lp);
    pmf[j + 2] += p_body * v;
    used += v;
  }
  pmf[kMaxScores] += p_body * std::max(0.0, 1.0 - used);
  return pmf;
}

std::array<double, kMonthBuckets> month_probs(const CohortGenParams& p) {
  std::array<double, kMonthBuckets> q{};
  double total = 0.0;
  for (int m = 0; m < kMonthBuckets; ++m) {
    q[m] = std::exp(-p.month_decay * m);
    if (m == kMonthBuckets - 1) q[m] *= p.month12_inflation;
    total += q[m];
  }
  for (double& v : q) v /= total;
  return q;
}

CohortTargets expected_summary(const CohortGenParams& params, const RealisticMix& mix) {
  const auto c = count_pmf(params);
  const auto q = month_probs(params);
  const double q12 = q[kMonthBuckets - 1];
  const double q_window = q[7] + q[8] + q[9];
  const double s = 1.0 - q[0];  // probability a score falls at t >= 4

  CohortTargets out;
  double en = 0.0, en2 = 0.0, p_ge5 = 0.0, p12 = 0.0, pw = 0.0;
  for (int n = 1; n <= kMaxScores; ++n) {
    en += n * c[n];
    en2 += double(n) * n * c[n];
    if (n >= 5) p_ge5 += c[n];
    p12 += c[n] * (1.0 - std::pow(1.0 - q12, n));
    pw += c[n] * (1.0 - std::pow(1.0 - q_window, n));
  }
  out.p_single = c[1];
  out.p_ge5 = p_ge5;
  out.mean_count = en;
  out.sd_count = std::sqrt(std::max(0.0, en2 - en * en));
  out.p_month12 = p12;
  out.p_window_10_13 = pw;
  out.max_count = kMaxScores;

  // First-month group: 1 + Binomial(n, s) scores.
  const double eb = en * s;
  const double eb2 = en * s * (1.0 - s) + en2 * s * s;
  const double e = mix.p_optimal * 10.0 + mix.p_first_month * (1.0 + eb) + mix.p_usual * en;
  const double e2 = mix.p_optimal * 100.0 + mix.p_first_month * (1.0 + 2.0 * eb + eb2) + mix.p_usual * en2;
  out.realistic_mean = e;
  out.realistic_sd = std::sqrt(std::max(0.0, e2 - e * e));
  return out;
}

namespace {

// Active (target, achieved, tolerance) triples.
std::vector<std::array<double, 3>> deviations(const CohortTargets& target, const CohortTargets& got,
                                              const CalibrationTolerances& tol) {
  std::vector<std::array<double, 3>> out{
      {target.p_single, got.p_single, tol.p_single},
      {target.p_ge5, got.p_ge5, tol.p_ge5},
      {target.mean_count, got.mean_count, tol.mean_count},
      {target.sd_count, got.sd_count, tol.sd_count},
      {target.p_month12, got.p_month12, tol.p_month12},
      {target.p_window_10_13, got.p_window_10_13, tol.p_window_10_13},
  };
  if (std::isfinite(target.realistic_mean)) out.push_back({target.realistic_mean, got.realistic_mean, tol.realistic_mean});
  if (std::isfinite(target.realistic_sd)) out.push_back({target.realistic_sd, got.realistic_sd, tol.realistic_sd});
  return out;
}

constexpr int kCoords = 6;
using Coords = std::array<double, kCoords>;

CohortGenParams from_coords(const Coords& x) {
  CohortGenParams p;
  p.p_one = x[0];
  p.p_heavy = x[1];
  p.nb_mean = std::exp(x[2]);
  p.nb_size = std::exp(x[3]);
  p.month_decay = x[4];
  p.month12_inflation = std::exp(x[5]);
  return p;
}

Coords clamp_coords(Coords x) {
  x[0] = std::clamp(x[0], 0.0, 1.0);
  x[1] = std::clamp(x[1], 0.0, 1.0 - x[0]);
  x[2] = std::clamp(x[2], -6.0, 4.0);
  x[3] = std::clamp(x[3], -4.0, 8.0);
  x[4] = std::clamp(x[4], -1.5, 1.5);
  x[5] = std::clamp(x[5], -4.0, 4.0);
  return x;
}

// Smooth stand-in for the worst tolerance ratio.
double calibration_loss(const Coords& x, const CohortTargets& target, const CalibrationTolerances& tol) {
  const auto got = expected_summary(from_coords(x));
  double loss = 0.0;
  for (const auto& [t, g, s] : deviations(target, got, tol)) {
    const double r = (g - t) / s;
    const double r2 = r * r;
    loss += r2 * r2 * r2 * r2 + 1e-3 * r2;
  }
  return loss;
}

}  // namespace

CalibrationResult calibrate_generator(const CohortTargets& targets, std::uint64_t seed,
                                      const CalibrationTolerances& tol) {
  const CohortGenParams start;
  Coords x = clamp_coords({start.p_one, start.p_heavy, std::log(start.nb_mean), std::log(start.nb_size),
                           start.month_decay, std::log(start.month12_inflation)});
  Coords step{0.05, 0.01, 0.25, 0.5, 0.02, 0.2};
  const double min_step = 1e-9;

  std::array<int, kCoords> order{};
  std::iota(order.begin(), order.end(), 0);
  Rng rng(stream_seed(seed, role::kCohort, 0, 1));
  std::shuffle(order.begin(), order.end(), rng);

  double best = calibration_loss(x, targets, tol);
  for (int sweep = 0; sweep < 20000; ++sweep) {
    bool improved = false;
    for (int c : order) {
      for (double dir : {1.0, -1.0}) {
        Coords y = x;
        y[c] += dir * step[c];
        y = clamp_coords(y);
        if (y == x) continue;
        const double v = calibration_loss(y, targets, tol);
        if (v < best) {
          best = v;
          x = y;
          step[c] *= 1.5;
          improved = true;
          break;
        }
      }
    }
    if (!improved) {
      bool all_small = true;
      for (double& s : step) {
        s *= 0.5;
        if (s > min_step) all_small = false;
      }
      if (all_small) break;
    }
  }

  CalibrationResult result;
  result.params = from_coords(x);
  result.params.p_heavy = std::clamp(result.params.p_heavy, 0.0, 1.0 - result.params.p_one);
  result.achieved = expected_summary(result.params);
  for (const auto& [t, g, s] : deviations(targets, result.achieved, tol))
    result.worst_ratio = std::max(result.worst_ratio, std::abs(g - t) / s);
  result.ok = result.worst_ratio <= 2.0;
  return result;
}

const CohortGenParams& default_generator_params() {
  static const CohortGenParams params = calibrate_generator(default_targets()).params;
  return params;
}

std::vector<int> draw_schedule_days(const CohortGenParams& params, Rng& rng) {
  const auto c = count_pmf(params);
  const auto q = month_probs(params);
  std::discrete_distribution<int> count_dist(c.begin(), c.end());
  std::discrete_distribution<int> month_dist(q.begin(), q.end());

  const int n = std::max(1, count_dist(rng));
  std::vector<int> days;
  days.reserve(static_cast<std::size_t>(n));
  while (static_cast<int>(days.size()) < n) {
    const auto range = bucket_days(month_dist(rng));
    std::uniform_int_distribution<int> day_dist(range.first, range.last);
    const int d = day_dist(rng);
    if (std::find(days.begin(), days.end(), d) == days.end()) days.push_back(d);
  }
  std::sort(days.begin(), days.end());
  return days;
}

Cohort generate_cohort(const CohortGenParams& params, int size, std::uint64_t seed) {
  if (size < 1) throw Error("cohort size must be at least 1");
  Rng rng = make_stream(seed, role::kCohort, 0, 0);
  std::vector<CohortParticipant> participants;
  participants.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) participants.emplace_back(draw_schedule_days(params, rng));
  return Cohort(std::move(participants));
}

const std::vector<double>& resample_schedule(const Cohort& cohort, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, cohort.size() - 1);
  return cohort.participants()[static_cast<std::size_t>(pick(rng))].follow_up_times();
}

CohortTargets summarize_cohort(const Cohort& cohort) {
  CohortTargets out;
  const double n = cohort.size();
  double single = 0, ge5 = 0, sum = 0, sum2 = 0, m12 = 0, win = 0;
  int max_count = 0;
  for (const auto& p : cohort.participants()) {
    const int k = p.count();
    single += k == 1;
    ge5 += k >= 5;
    sum += k;
    sum2 += double(k) * k;
    max_count = std::max(max_count, k);
    const auto& t = p.follow_up_times();
    m12 += std::any_of(t.begin(), t.end(), [](double v) { return v >= 12.0 && v < 13.0; });
    win += std::any_of(t.begin(), t.end(), [](double v) { return v >= 10.0 && v <= 13.0; });
  }
  out.p_single = single / n;
  out.p_ge5 = ge5 / n;
  out.mean_count = sum / n;
  // Population SD (divisor n); a single participant gives 0.
  out.sd_count = std::sqrt(std::max(0.0, sum2 / n - out.mean_count * out.mean_count));
  out.p_month12 = m12 / n;
  out.p_window_10_13 = win / n;
  out.max_count = max_count;
  return out;
}

}  // namespace pragsim
