#include <cmath>

#include "pragsim/error.hpp"
#include "pragsim/estimators.hpp"

namespace pragsim {

Contrast effect_contrast(const Eigen::VectorXd& coefficients, const Eigen::MatrixXd& cov, const Design& design,
                         const ModelSpec& spec, const SplineBasis* basis, double t_star) {
  const auto p = coefficients.size();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(p);
  c[design.arm_column] = 1.0;
  if (spec.effect_model == EffectModel::TimeVarying) {
    if (basis == nullptr) throw Error("effect contrast: time-varying effect needs a spline basis");
    const Eigen::VectorXd b = basis->evaluate(t_star);
    for (std::size_t k = 0; k < design.interaction_columns.size(); ++k)
      c[design.interaction_columns[k]] = b[static_cast<Eigen::Index>(k)];
  }
  const double var = c.dot(cov * c);
  return {c.dot(coefficients), std::sqrt(std::max(var, 0.0))};
}

WaldResult wald(double estimate, double se) {
  if (!(se > 0.0) || !std::isfinite(se) || !std::isfinite(estimate))
    throw DegenerateInferenceError("wald: standard error must be positive and finite");
  WaldResult w;
  w.ci_low = estimate - kZ975 * se;
  w.ci_high = estimate + kZ975 * se;
  w.z = estimate / se;
  w.p = std::erfc(std::abs(w.z) / std::sqrt(2.0));
  w.reject = std::abs(w.z) > kZ975;
  return w;
}

}  // namespace pragsim
