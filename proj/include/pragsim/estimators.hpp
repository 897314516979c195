#pragma once
// Analytic approaches: score selection, design matrices, OLS/WGEE with
// cluster-robust variance, effect contrasts and Wald inference.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pragsim/dgp.hpp"
#include "pragsim/rng.hpp"
#include "pragsim/spline.hpp"

namespace pragsim {

enum class Selection { All, Random, ClosestTo12, Mean, Best };
enum class TimeAdjust { None, Linear, Splines3 };
enum class EffectModel { Constant, TimeVarying };
enum class Engine { OlsSandwich, Wgee, LmmExchangeable, LmmCar1, LmmExponential };

struct MeanOptions {
  bool weight_by_n = false;
  bool adjust_for_n = false;
};

struct ModelSpec {
  std::string key;
  Selection selection = Selection::All;
  MeanOptions mean_options;
  TimeAdjust time_adjust = TimeAdjust::Splines3;
  EffectModel effect_model = EffectModel::Constant;
  Engine engine = Engine::LmmExponential;
  double target_time = 12.0;
};

/// Throws Error when the combination of options is not one of the supported
/// approaches (e.g. a single-score selection with an LMM engine).
void validate(const ModelSpec& spec);

bool is_lmm(Engine engine);

struct AnalysisRow {
  int person_id = 0;
  int site = 0;
  int arm = 0;
  double baseline = 0.0;
  std::optional<double> t;  // absent for Mean/Best summaries
  double y = 0.0;
  int n_i = 1;
  double weight = 1.0;
};

/// Rows entering the model. Random draws from `rng`; every other selection
/// is deterministic.
std::vector<AnalysisRow> select_scores(const TrialDataset& dataset, const ModelSpec& spec, Rng& rng);

/// True when the model needs a spline basis built from the analysis times.
bool needs_basis(const ModelSpec& spec);

struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<int> clusters;  // person id of every row
  Eigen::VectorXd weights;
  std::vector<double> times;  // NaN when the row has no time
  std::vector<std::string> columns;
  int arm_column = -1;
  std::vector<int> interaction_columns;
};

/// Columns: intercept, baseline, site, time terms, arm, arm x spline terms,
/// and n_i for Mean/Best adjusted for the number of scores. Throws
/// RankDeficientError naming the aliased columns.
Design build_design(const std::vector<AnalysisRow>& rows, const ModelSpec& spec, const SplineBasis* basis);

struct OlsFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd cov;  // CR0 sandwich
  bool ok = false;
};

/// Weighted least squares with the cluster-robust sandwich B^-1 M B^-1,
/// B = X'WX, M = sum over clusters of (X_c' W_c r_c)(X_c' W_c r_c)'.
/// Rows of a cluster must be contiguous. `ok` is false when B is singular.
OlsFit fit_ols_sandwich(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<int>& clusters,
                        const Eigen::VectorXd& weights);

struct Contrast {
  double estimate;
  double se;
};

/// Effect at `t_star`: the arm coefficient for constant-effect models, and
/// c'beta with c = e_arm + sum_k B_k(t_star) e_{arm:B_k} for time-varying ones.
Contrast effect_contrast(const Eigen::VectorXd& coefficients, const Eigen::MatrixXd& cov, const Design& design,
                         const ModelSpec& spec, const SplineBasis* basis, double t_star = 12.0);

inline constexpr double kZ975 = 1.96;

struct WaldResult {
  double ci_low;
  double ci_high;
  double z;
  double p;
  bool reject;
};

/// Normal-theory Wald test; reject iff |z| > 1.96. Throws
/// DegenerateInferenceError when se is not positive.
WaldResult wald(double estimate, double se);

enum class EstimandKind { ConstantEffect, EffectAt12 };

struct FitResult {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd cov;
  double effect_estimate = 0.0;
  double effect_se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double z = 0.0;
  double p = 1.0;
  bool reject = false;
  bool converged = false;
  EstimandKind estimand = EstimandKind::ConstantEffect;
  std::string message;  // why the fit failed, when it did
};

/// Runs one analytic approach end to end on a dataset. Never throws for
/// numerical failures; those come back with converged = false.
FitResult fit_model(const TrialDataset& dataset, const ModelSpec& spec, Rng& rng);

}  // namespace pragsim
