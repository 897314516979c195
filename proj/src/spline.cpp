#include "pragsim/spline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pragsim/error.hpp"

namespace pragsim {

namespace {

double cube_pos(double x) { return x > 0.0 ? x * x * x : 0.0; }

}  // namespace

SplineBasis::SplineBasis(std::pair<double, double> boundary, std::vector<double> interior)
    : boundary_(boundary), interior_(std::move(interior)) {
  const double lo = boundary_.first;
  const double hi = boundary_.second;
  if (interior_.empty()) throw DegenerateKnotsError("spline basis needs df >= 2");
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi))
    throw DegenerateKnotsError("spline boundary knots must satisfy low < high");
  double prev = lo;
  for (double k : interior_) {
    if (!(k > prev)) {
      std::ostringstream os;
      os << "spline knots not strictly increasing (" << prev << " >= " << k << ")";
      throw DegenerateKnotsError(os.str());
    }
    prev = k;
  }
  if (!(hi > prev)) throw DegenerateKnotsError("last interior knot must be below the upper boundary");

  const double width = hi - lo;
  knots_u_.reserve(interior_.size() + 2);
  knots_u_.push_back(0.0);
  for (double k : interior_) knots_u_.push_back((k - lo) / width);
  knots_u_.push_back(1.0);
}

void SplineBasis::evaluate_into(double t, std::span<double> out) const {
  if (!std::isfinite(t)) throw Error("spline: cannot evaluate at a non-finite time");
  const double u = (t - boundary_.first) / (boundary_.second - boundary_.first);
  const std::size_t K = knots_u_.size();
  const double last = knots_u_[K - 1];
  auto d = [&](std::size_t k) {
    return (cube_pos(u - knots_u_[k]) - cube_pos(u - last)) / (last - knots_u_[k]);
  };
  const double d_last = d(K - 2);
  out[0] = u;
  for (std::size_t k = 0; k + 2 < K; ++k) out[k + 1] = d(k) - d_last;
}

Eigen::VectorXd SplineBasis::evaluate(double t) const {
  Eigen::VectorXd v(df());
  evaluate_into(t, std::span<double>(v.data(), static_cast<std::size_t>(v.size())));
  return v;
}

double quantile_linear(std::span<const double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

SplineBasis build_basis(std::span<const double> times, int df) {
  if (df < 2) throw DegenerateKnotsError("spline df must be at least 2");
  if (times.empty()) throw DegenerateKnotsError("no times to place knots");
  std::vector<double> sorted(times.begin(), times.end());
  std::sort(sorted.begin(), sorted.end());
  int n_distinct = 1;
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i] != sorted[i - 1]) ++n_distinct;
  if (n_distinct < df + 1) {
    std::ostringstream os;
    os << "degenerate knots: " << n_distinct << " distinct time value(s), need at least " << df + 1;
    throw DegenerateKnotsError(os.str());
  }
  std::vector<double> interior;
  interior.reserve(static_cast<std::size_t>(df - 1));
  for (int k = 1; k < df; ++k) interior.push_back(quantile_linear(sorted, static_cast<double>(k) / df));
  return SplineBasis({sorted.front(), sorted.back()}, std::move(interior));
}

}  // namespace pragsim
