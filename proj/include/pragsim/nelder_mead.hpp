#pragma once

#include <functional>
#include <span>
#include <vector>

namespace pragsim {

struct NelderMeadOptions {
  /// Stop when (f_worst - f_best) <= rel_tol * (|f_best| + rel_tol).
  double rel_tol = 1e-8;
  int max_evals = 1000;
  /// Edge length of the initial simplex along each axis.
  double initial_step = 0.5;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evals = 0;
  bool converged = false;
};

/// Derivative-free simplex minimization (standard reflection/expansion/
/// contraction/shrink coefficients 1, 2, 0.5, 0.5). Non-finite objective
/// values are treated as +infinity.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> start,
                             const NelderMeadOptions& options = {});

}  // namespace pragsim
