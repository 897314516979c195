#include <optional>

#include "pragsim/error.hpp"
#include "pragsim/estimators.hpp"
#include "pragsim/lmm.hpp"

namespace pragsim {

namespace {

CorrStructure structure_of(Engine engine) {
  switch (engine) {
    case Engine::LmmCar1:
      return CorrStructure::CAR1;
    case Engine::LmmExponential:
      return CorrStructure::Exponential;
    default:
      return CorrStructure::Exchangeable;
  }
}

}  // namespace

FitResult fit_model(const TrialDataset& dataset, const ModelSpec& spec, Rng& rng) {
  validate(spec);
  FitResult out;
  out.estimand = spec.effect_model == EffectModel::TimeVarying ? EstimandKind::EffectAt12 : EstimandKind::ConstantEffect;
  try {
    const std::vector<AnalysisRow> rows = select_scores(dataset, spec, rng);
    std::optional<SplineBasis> basis;
    if (needs_basis(spec)) {
      std::vector<double> times;
      times.reserve(rows.size());
      for (const auto& r : rows) times.push_back(*r.t);
      basis = build_basis(times, 3);
    }
    const SplineBasis* bp = basis ? &*basis : nullptr;
    const Design d = build_design(rows, spec, bp);

    if (is_lmm(spec.engine)) {
      const LmmFit f = fit_lmm_reml(d.X, d.y, d.clusters, d.times, structure_of(spec.engine));
      if (!f.converged) {
        out.message = "REML optimization did not converge";
        return out;
      }
      out.coefficients = f.coefficients;
      out.cov = f.cov;
    } else {
      const OlsFit f = fit_ols_sandwich(d.X, d.y, d.clusters, d.weights);
      if (!f.ok) {
        out.message = "singular X'WX";
        return out;
      }
      out.coefficients = f.coefficients;
      out.cov = f.cov;
    }

    const Contrast c = effect_contrast(out.coefficients, out.cov, d, spec, bp, spec.target_time);
    const WaldResult w = wald(c.estimate, c.se);
    out.effect_estimate = c.estimate;
    out.effect_se = c.se;
    out.ci_low = w.ci_low;
    out.ci_high = w.ci_high;
    out.z = w.z;
    out.p = w.p;
    out.reject = w.reject;
    out.converged = true;
  } catch (const Error& e) {
    out.converged = false;
    out.message = e.what();
  }
  return out;
}

}  // namespace pragsim
