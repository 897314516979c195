#include <cmath>
#include <limits>
#include <sstream>

#include "pragsim/error.hpp"
#include "pragsim/estimators.hpp"

namespace pragsim {

Design build_design(const std::vector<AnalysisRow>& rows, const ModelSpec& spec, const SplineBasis* basis) {
  if (rows.empty()) throw RankDeficientError("design: no analysis rows");
  if (needs_basis(spec) && basis == nullptr) throw Error("design: model " + spec.key + " needs a spline basis");

  Design d;
  d.columns = {"(Intercept)", "baseline", "site"};
  const int df = basis ? basis->df() : 0;
  switch (spec.time_adjust) {
    case TimeAdjust::None:
      break;
    case TimeAdjust::Linear:
      d.columns.push_back("t");
      break;
    case TimeAdjust::Splines3:
      for (int k = 0; k < df; ++k) d.columns.push_back("ns" + std::to_string(k + 1) + "(t)");
      break;
  }
  d.arm_column = static_cast<int>(d.columns.size());
  d.columns.push_back("arm");
  if (spec.effect_model == EffectModel::TimeVarying) {
    for (int k = 0; k < df; ++k) {
      d.interaction_columns.push_back(static_cast<int>(d.columns.size()));
      d.columns.push_back("arm:ns" + std::to_string(k + 1) + "(t)");
    }
  }
  const bool add_n = (spec.selection == Selection::Mean || spec.selection == Selection::Best) &&
                     spec.mean_options.adjust_for_n;
  if (add_n) d.columns.push_back("n_i");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(d.columns.size());
  d.X.resize(n, p);
  d.y.resize(n);
  d.weights.resize(n);
  d.clusters.resize(rows.size());
  d.times.resize(rows.size());

  Eigen::VectorXd b(df);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    const bool needs_t = spec.time_adjust != TimeAdjust::None || spec.effect_model == EffectModel::TimeVarying;
    if (needs_t && !r.t) throw Error("design: row without a time in a time-adjusted model");
    const double t = r.t.value_or(std::numeric_limits<double>::quiet_NaN());
    Eigen::Index c = 0;
    d.X(i, c++) = 1.0;
    d.X(i, c++) = r.baseline;
    d.X(i, c++) = r.site;
    if (basis && needs_t) basis->evaluate_into(t, std::span<double>(b.data(), static_cast<std::size_t>(df)));
    if (spec.time_adjust == TimeAdjust::Linear) d.X(i, c++) = t;
    if (spec.time_adjust == TimeAdjust::Splines3)
      for (int k = 0; k < df; ++k) d.X(i, c++) = b[k];
    d.X(i, c++) = r.arm;
    if (spec.effect_model == EffectModel::TimeVarying)
      for (int k = 0; k < df; ++k) d.X(i, c++) = r.arm * b[k];
    if (add_n) d.X(i, c++) = r.n_i;
    d.y[i] = r.y;
    d.weights[i] = r.weight;
    d.clusters[static_cast<std::size_t>(i)] = r.person_id;
    d.times[static_cast<std::size_t>(i)] = t;
  }

  // Rank check on the column-scaled design.
  Eigen::VectorXd scale = d.X.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < p; ++j)
    if (scale[j] == 0.0) scale[j] = 1.0;
  const Eigen::MatrixXd Xs = d.X * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::ostringstream os;
    os << "design for " << (spec.key.empty() ? "model" : spec.key) << " is rank deficient (rank " << qr.rank()
       << " of " << p << "); aliased column(s):";
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < p; ++j) os << ' ' << d.columns[static_cast<std::size_t>(perm[j])];
    throw RankDeficientError(os.str());
  }
  return d;
}

}  // namespace pragsim
