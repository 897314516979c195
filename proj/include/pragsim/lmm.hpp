#pragma once
// Linear mixed models with a random intercept and serial correlation,
// fitted by restricted maximum likelihood.
//
// Marginal covariance per person: V = sigma_b2 * J + sigma2 * R, where R is
// the identity (Exchangeable), rho^|dt| (CAR1) or exp(-|dt| / range)
// (Exponential). Writing V = sigma2 * (R + gamma * J) with gamma =
// sigma_b2 / sigma2, the serial part has a bidiagonal inverse factor (the
// process is Markov in time) and the random intercept is a rank-one update,
// so each criterion evaluation is linear in the number of rows.

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pragsim {

enum class CorrStructure { Exchangeable, CAR1, Exponential };

struct VarianceParams {
  double sigma_b2 = 0.0;
  double sigma2 = 1.0;
  /// rho in (0, 1) for CAR1, range > 0 for Exponential; unused otherwise.
  double corr_param = 0.0;
};

/// -2 x restricted log-likelihood without the 2*pi constant:
///   sum_i log det V_i + log det(X' V^-1 X) + r' V^-1 r,  r = y - X beta_GLS.
/// Rows must be grouped by person and sorted by time within person.
/// Returns +infinity for invalid or non-positive-definite parameters.
double reml_objective(const VarianceParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      std::span<const int> person_ids, std::span<const double> times, CorrStructure structure);

/// Same criterion computed from explicitly assembled per-person covariance
/// matrices and dense Cholesky factors. Reference path for testing.
double reml_objective_dense(const VarianceParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            std::span<const int> person_ids, std::span<const double> times,
                            CorrStructure structure);

struct GlsFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd cov;  // (X' V^-1 X)^-1
  bool ok = false;
};

/// Generalized least squares at fixed variance parameters.
GlsFit fit_gls(const VarianceParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               std::span<const int> person_ids, std::span<const double> times, CorrStructure structure);

struct LmmOptions {
  double rel_tol = 1e-8;
  int max_evals_per_start = 600;
};

struct LmmFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd cov;  // model-based
  VarianceParams variance;
  double objective = 0.0;  // reml_objective at the solution
  bool converged = false;
};

/// REML fit. sigma2 is profiled out analytically; the remaining parameters
/// (log gamma, and logit rho or log range) are optimized by Nelder-Mead from
/// three dispersed starts and the best solution is kept.
LmmFit fit_lmm_reml(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> person_ids,
                    std::span<const double> times, CorrStructure structure, const LmmOptions& options = {});

/// Internal evaluator exposed for the fitter, the tests and benchmarking.
class RemlProblem {
 public:
  RemlProblem(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> person_ids,
              std::span<const double> times, CorrStructure structure);

  /// Lag-one correlation for a time gap under the given correlation parameter.
  double lag_correlation(double gap, double corr_param) const;

  struct Pieces {
    Eigen::MatrixXd xtvx;  // X' R*^-1 X with R* = R + gamma J
    Eigen::VectorXd xtvy;
    double ytvy = 0.0;
    double logdet = 0.0;  // sum_i log det(R_i + gamma J)
    bool ok = false;
  };
  Pieces pieces(double gamma, double corr_param) const;

  /// Criterion with sigma2 profiled out.
  double profiled(double gamma, double corr_param) const;
  double full(const VarianceParams& params) const;
  GlsFit gls(const VarianceParams& params) const;

  int rows() const { return static_cast<int>(n_); }
  int cols() const { return static_cast<int>(p_); }
  CorrStructure structure() const { return structure_; }

 private:
  struct Solved {
    Eigen::VectorXd beta;
    Eigen::MatrixXd xtvx_inv;
    double q = 0.0;
    double logdet_xtvx = 0.0;
    bool ok = false;
  };
  Solved solve(const Pieces& pc, bool want_inverse) const;

  CorrStructure structure_;
  Eigen::Index n_ = 0, p_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> aug_;          // row-major [X | y]
  std::vector<std::size_t> starts_;  // person offsets, size persons + 1
  std::vector<double> gaps_;         // time gap to the previous row of the same person
  std::vector<double> base_gram_;    // [X|y]'[X|y], used by Exchangeable
  std::vector<double> person_sums_;  // per-person column sums of [X|y]

  mutable std::vector<double> white_, rho_, scale_, g_, c_, gram_;
};

}  // namespace pragsim
