#pragma once
// Natural cubic spline bases with knots at quantiles of the data.

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace pragsim {

/// A natural cubic spline basis of dimension `df` (constant excluded).
///
/// The representation is the truncated-power form on the rescaled variable
/// u = (t - low) / (high - low): the first function is u itself, the others
/// are the differences of truncated cubics that cancel their cubic and
/// quadratic parts past the last knot. All functions are linear outside
/// [low, high].
class SplineBasis {
 public:
  SplineBasis(std::pair<double, double> boundary, std::vector<double> interior);

  int df() const { return static_cast<int>(interior_.size()) + 1; }
  std::pair<double, double> boundary_knots() const { return boundary_; }
  const std::vector<double>& interior_knots() const { return interior_; }

  /// Basis values at t; length df().
  Eigen::VectorXd evaluate(double t) const;
  void evaluate_into(double t, std::span<double> out) const;

 private:
  std::pair<double, double> boundary_;
  std::vector<double> interior_;
  std::vector<double> knots_u_;  // all knots on the rescaled axis, ascending
};

/// Knots at min/max of `times` and interior knots at the k/df quantiles
/// (linear interpolation between order statistics). Throws
/// DegenerateKnotsError when there are fewer than df + 1 distinct times or
/// the resulting knots are not strictly increasing.
SplineBasis build_basis(std::span<const double> times, int df = 3);

/// Sample quantile with linear interpolation between order statistics.
double quantile_linear(std::span<const double> sorted, double p);

}  // namespace pragsim
