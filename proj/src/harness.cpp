#include "pragsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

#include "pragsim/error.hpp"

namespace pragsim {

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` threads. fn must not throw.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::uint64_t method_role(const ModelSpec& m) { return hash_name(m.key); }

bool fits_constant_plim(const ModelSpec& m) {
  return m.effect_model == EffectModel::Constant &&
         (m.selection == Selection::Random || m.selection == Selection::ClosestTo12 || m.selection == Selection::All);
}

}  // namespace

double true_effect_at_12(const EffectSpec& effect) { return effect_value(effect, 12.0); }

std::vector<PlimEstimate> oracle_constant_plim(const ScenarioConfig& scenario, const std::vector<ModelSpec>& methods,
                                               const Cohort& cohort, int n_big, int k_reps, std::uint64_t seed,
                                               int threads) {
  if (n_big < kOracleMinN)
    throw Error("oracle: n_big must be at least " + std::to_string(kOracleMinN) + " (got " + std::to_string(n_big) + ")");
  if (k_reps < kOracleMinReps)
    throw Error("oracle: k_reps must be at least " + std::to_string(kOracleMinReps) + " (got " +
                std::to_string(k_reps) + ")");
  for (const auto& m : methods) {
    validate(m);
    if (!fits_constant_plim(m))
      throw Error("oracle: method " + m.key + " does not fit a constant effect on random, closest-to-12 or all scores");
  }

  ScenarioConfig big = scenario;
  const int per_site = (n_big + scenario.sites - 1) / scenario.sites;
  big.n_per_site = per_site + per_site % 2;
  const std::uint64_t sid = hash_name(scenario.id);

  // estimates[k][m]
  std::vector<std::vector<std::optional<double>>> estimates(static_cast<std::size_t>(k_reps));
  std::vector<std::string> failures(static_cast<std::size_t>(k_reps));
  parallel_for(k_reps, threads, [&](int k) {
    auto& slot = estimates[static_cast<std::size_t>(k)];
    slot.assign(methods.size(), std::nullopt);
    try {
      Rng data_rng = make_stream(seed, sid, static_cast<std::uint64_t>(k), role::kOracle);
      const TrialDataset data = generate_trial(big, cohort, data_rng);
      for (std::size_t m = 0; m < methods.size(); ++m) {
        Rng sel = make_stream(seed, sid, static_cast<std::uint64_t>(k), method_role(methods[m]) ^ role::kOracle);
        const FitResult f = fit_model(data, methods[m], sel);
        if (f.converged) slot[m] = f.effect_estimate;
      }
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(k)] = e.what();
    }
  });
  for (const auto& f : failures)
    if (!f.empty()) throw Error("oracle: dataset generation failed: " + f);

  std::vector<PlimEstimate> out(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<double> v;
    for (const auto& row : estimates)
      if (row[m]) v.push_back(*row[m]);
    if (v.size() < 2) throw Error("oracle: too few converged fits for " + methods[m].key);
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out[m].value = mean;
    out[m].mc_se = std::sqrt(ss / (n - 1.0) / n);
    out[m].n_used = static_cast<int>(v.size());
  }
  return out;
}

PlimEstimate oracle_constant_plim(const ScenarioConfig& scenario, const ModelSpec& method, const Cohort& cohort,
                                  int n_big, int k_reps, std::uint64_t seed) {
  return oracle_constant_plim(scenario, std::vector<ModelSpec>{method}, cohort, n_big, k_reps, seed, 1).front();
}

std::vector<ReplicateResult> run_replicate(const ScenarioConfig& scenario, const std::vector<ModelSpec>& methods,
                                           const Cohort& cohort, int rep_index, std::uint64_t base_seed) {
  if (methods.empty()) throw Error("run_replicate: no methods");
  std::vector<ReplicateResult> out(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    out[m].scenario_id = scenario.id;
    out[m].method_key = methods[m].key;
    out[m].rep_index = rep_index;
  }
  const std::uint64_t sid = hash_name(scenario.id);
  const auto rep = static_cast<std::uint64_t>(rep_index);

  TrialDataset data;
  try {
    Rng data_rng = make_stream(base_seed, sid, rep, role::kDataset);
    data = generate_trial(scenario, cohort, data_rng);
  } catch (const std::exception& e) {
    const std::string msg = "replicate " + std::to_string(rep_index) + " of " + scenario.id +
                            ": data generation failed: " + e.what();
    for (auto& r : out) r.message = msg;
    return out;
  }

  for (std::size_t m = 0; m < methods.size(); ++m) {
    Rng sel = make_stream(base_seed, sid, rep, method_role(methods[m]));
    const FitResult f = fit_model(data, methods[m], sel);
    auto& r = out[m];
    r.converged = f.converged;
    r.message = f.message;
    if (!f.converged) continue;
    r.effect_estimate = f.effect_estimate;
    r.effect_se = f.effect_se;
    r.ci_low = f.ci_low;
    r.ci_high = f.ci_high;
    r.reject = f.reject;
  }
  return out;
}

ScenarioSummary summarize(const std::vector<ReplicateResult>& results, const EstimandRef& estimand) {
  ScenarioSummary s;
  s.estimand = estimand;
  s.method_key = estimand.method_key;
  if (!results.empty()) {
    s.scenario_id = results.front().scenario_id;
    s.method_key = results.front().method_key;
  }
  s.n_reps = static_cast<int>(results.size());

  std::vector<double> est, se;
  int rejects = 0, covered = 0;
  for (const auto& r : results) {
    if (!r.converged) continue;
    est.push_back(r.effect_estimate);
    se.push_back(r.effect_se);
    rejects += r.reject ? 1 : 0;
    if (estimand.value && r.ci_low <= *estimand.value && *estimand.value <= r.ci_high) ++covered;
  }
  s.n_converged = static_cast<int>(est.size());
  if (s.n_converged < 2) return s;

  const double n = static_cast<double>(est.size());
  const double mean = std::accumulate(est.begin(), est.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : est) ss += (x - mean) * (x - mean);
  s.mean_estimate = mean;
  s.empirical_se = std::sqrt(ss / (n - 1.0));
  std::sort(se.begin(), se.end());
  const std::size_t h = se.size() / 2;
  s.median_model_se = se.size() % 2 == 1 ? se[h] : 0.5 * (se[h - 1] + se[h]);
  const double p = rejects / n;
  s.rejection_rate = p;
  s.mc_se_rejection = std::sqrt(p * (1.0 - p) / n);
  if (estimand.value) {
    s.bias = mean - *estimand.value;
    s.coverage = covered / n;
  }
  return s;
}

EstimandRef resolve_estimand(const ScenarioConfig& scenario, const ModelSpec& method, const Cohort& cohort,
                             const OracleSettings& oracle, int threads) {
  EstimandRef e;
  e.method_key = method.key;
  const bool time_varying = method.effect_model == EffectModel::TimeVarying;
  if (scenario.effect.kind != EffectKind::Ramp) {
    e.kind = time_varying ? EstimandRefKind::EffectAt12 : EstimandRefKind::ConstantEffect;
    e.value = true_effect_at_12(scenario.effect);
    return e;
  }
  if (time_varying) {
    e.kind = EstimandRefKind::EffectAt12;
    e.value = true_effect_at_12(scenario.effect);
    return e;
  }
  e.kind = EstimandRefKind::ConstantPlim;
  const bool single = method.selection == Selection::Random || method.selection == Selection::ClosestTo12;
  const bool all = method.selection == Selection::All && oracle.all_scores;
  if (single || all) {
    const auto plim = oracle_constant_plim(scenario, std::vector<ModelSpec>{method}, cohort, oracle.n_big,
                                           oracle.k_reps, oracle.seed, threads);
    e.value = plim.front().value;
    e.mc_se = plim.front().mc_se;
  }
  return e;
}

std::shared_ptr<const Cohort> CohortCache::get(const CohortRef& ref) {
  const std::string key = ref.key();
  for (const auto& [k, c] : entries_)
    if (k == key) return c;
  std::shared_ptr<const Cohort> c;
  if (!ref.path.empty())
    c = std::make_shared<const Cohort>(Cohort::load_json(ref.path));
  else
    c = std::make_shared<const Cohort>(generate_cohort(default_generator_params(), ref.size, ref.seed));
  entries_.emplace_back(key, c);
  return c;
}

std::vector<ScenarioSummary> run_grid(const std::vector<ScenarioConfig>& scenarios,
                                      const std::vector<ModelSpec>& methods, const GridOptions& options,
                                      CohortCache* cache) {
  if (options.reps < 1) throw Error("run_grid: reps must be >= 1");
  if (methods.empty()) return {};
  for (const auto& m : methods) validate(m);
  CohortCache local;
  if (cache == nullptr) cache = &local;

  std::vector<ScenarioSummary> out;
  for (const auto& scenario : scenarios) {
    std::vector<ScenarioSummary> cells(methods.size());
    for (std::size_t m = 0; m < methods.size(); ++m) {
      cells[m].scenario_id = scenario.id;
      cells[m].method_key = methods[m].key;
      cells[m].method = methods[m];
      cells[m].estimand.method_key = methods[m].key;
    }

    std::shared_ptr<const Cohort> cohort;
    try {
      cohort = cache->get(scenario.cohort);
    } catch (const std::exception& e) {
      for (auto& c : cells) c.error = std::string("cohort unavailable: ") + e.what();
      out.insert(out.end(), cells.begin(), cells.end());
      continue;
    }

    // Estimands. Oracle methods of one scenario share the oracle datasets.
    std::vector<std::size_t> oracle_idx;
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto& mm = methods[m];
      EstimandRef& e = cells[m].estimand;
      const bool needs_oracle = scenario.effect.kind == EffectKind::Ramp && mm.effect_model == EffectModel::Constant &&
                                (mm.selection == Selection::Random || mm.selection == Selection::ClosestTo12 ||
                                 (mm.selection == Selection::All && options.oracle.all_scores));
      if (needs_oracle) {
        e.kind = EstimandRefKind::ConstantPlim;
        oracle_idx.push_back(m);
      } else {
        e = resolve_estimand(scenario, mm, *cohort, options.oracle);
      }
    }
    if (!oracle_idx.empty()) {
      std::vector<ModelSpec> om;
      for (auto m : oracle_idx) om.push_back(methods[m]);
      try {
        const auto plims = oracle_constant_plim(scenario, om, *cohort, options.oracle.n_big, options.oracle.k_reps,
                                                options.oracle.seed, options.threads);
        for (std::size_t j = 0; j < oracle_idx.size(); ++j) {
          cells[oracle_idx[j]].estimand.value = plims[j].value;
          cells[oracle_idx[j]].estimand.mc_se = plims[j].mc_se;
        }
      } catch (const std::exception& e) {
        for (auto m : oracle_idx) cells[m].error = std::string("estimand oracle failed: ") + e.what();
      }
    }

    // Replicates; results[rep] holds one entry per method.
    std::vector<std::vector<ReplicateResult>> results(static_cast<std::size_t>(options.reps));
    parallel_for(options.reps, options.threads, [&](int rep) {
      results[static_cast<std::size_t>(rep)] = run_replicate(scenario, methods, *cohort, rep, options.base_seed);
    });

    for (std::size_t m = 0; m < methods.size(); ++m) {
      std::vector<ReplicateResult> per;
      per.reserve(results.size());
      for (const auto& r : results) per.push_back(r[m]);
      ScenarioSummary s = summarize(per, cells[m].estimand);
      s.scenario_id = scenario.id;
      s.method_key = methods[m].key;
      s.method = methods[m];
      s.error = cells[m].error;
      out.push_back(std::move(s));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const ScenarioSummary& a, const ScenarioSummary& b) {
    return std::tie(a.scenario_id, a.method_key) < std::tie(b.scenario_id, b.method_key);
  });
  return out;
}

}  // namespace pragsim
