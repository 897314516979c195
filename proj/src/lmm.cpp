#include "pragsim/lmm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "pragsim/dgp.hpp"
#include "pragsim/error.hpp"
#include "pragsim/kernels.hpp"
#include "pragsim/nelder_mead.hpp"

namespace pragsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Optimizer box on the unconstrained scale.
constexpr double kLogGammaLo = -25.0, kLogGammaHi = 12.0;
constexpr double kLogitRhoBound = 25.0;
constexpr double kLogRangeBound = 12.0;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool valid_corr_param(CorrStructure s, double c) {
  switch (s) {
    case CorrStructure::Exchangeable:
      return true;
    case CorrStructure::CAR1:
      return c > 0.0 && c < 1.0;
    case CorrStructure::Exponential:
      return c > 0.0 && std::isfinite(c);
  }
  return false;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

RemlProblem::RemlProblem(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> person_ids,
                         std::span<const double> times, CorrStructure structure)
    : structure_(structure), n_(X.rows()), p_(X.cols()), dim_(static_cast<std::size_t>(X.cols() + 1)) {
  const auto n = static_cast<std::size_t>(n_);
  if (y.size() != n_ || person_ids.size() != n || times.size() != n)
    throw Error("lmm: X, y, person ids and times differ in length");
  if (n_ < p_) throw RankDeficientError("lmm: fewer rows than fixed effects");

  aug_.resize(n * dim_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    double* row = aug_.data() + static_cast<std::size_t>(i) * dim_;
    for (Eigen::Index j = 0; j < p_; ++j) row[j] = X(i, j);
    row[p_] = y[i];
  }

  gaps_.assign(n, 0.0);
  starts_.push_back(0);
  for (std::size_t i = 1; i < n; ++i) {
    if (person_ids[i] != person_ids[i - 1]) {
      starts_.push_back(i);
      continue;
    }
    gaps_[i] = times[i] - times[i - 1];
    if (structure_ != CorrStructure::Exchangeable && !(gaps_[i] > 0.0))
      throw Error("lmm: times must be strictly increasing within person " + std::to_string(person_ids[i]));
  }
  starts_.push_back(n);

  const std::size_t persons = starts_.size() - 1;
  if (structure_ == CorrStructure::Exchangeable) {
    base_gram_.assign(dim_ * dim_, 0.0);
    kernels::gram_upper(aug_, dim_, {}, base_gram_);
    person_sums_.assign(persons * dim_, 0.0);
    for (std::size_t k = 0; k < persons; ++k) {
      double* s = person_sums_.data() + k * dim_;
      for (std::size_t i = starts_[k]; i < starts_[k + 1]; ++i)
        for (std::size_t j = 0; j < dim_; ++j) s[j] += aug_[i * dim_ + j];
    }
  } else {
    white_.resize(n * dim_);
    rho_.resize(n);
    scale_.resize(n);
    g_.resize(persons * dim_);
  }
  c_.resize(persons);
  gram_.resize(dim_ * dim_);
}

double RemlProblem::lag_correlation(double gap, double corr_param) const {
  switch (structure_) {
    case CorrStructure::Exchangeable:
      return 0.0;
    case CorrStructure::CAR1:
      return std::pow(corr_param, gap);
    case CorrStructure::Exponential:
      return std::exp(-gap / corr_param);
  }
  return 0.0;
}

RemlProblem::Pieces RemlProblem::pieces(double gamma, double corr_param) const {
  Pieces pc;
  if (!(gamma >= 0.0) || !std::isfinite(gamma) || !valid_corr_param(structure_, corr_param)) return pc;
  const std::size_t persons = starts_.size() - 1;
  double logdet = 0.0;

  if (structure_ == CorrStructure::Exchangeable) {
    // R = I: whitened ones are the ones vector, u'u = n_i, g = column sums.
    gram_ = base_gram_;
    for (std::size_t k = 0; k < persons; ++k) {
      const double m = static_cast<double>(starts_[k + 1] - starts_[k]);
      c_[k] = -gamma / (1.0 + gamma * m);
      logdet += std::log1p(gamma * m);
    }
    kernels::gram_upper(person_sums_, dim_, c_, gram_);
  } else {
    const std::size_t n = static_cast<std::size_t>(n_);
    // rho^gap and exp(-gap / range) are both exp(-gap * k).
    const double decay = structure_ == CorrStructure::CAR1 ? -std::log(corr_param) : 1.0 / corr_param;
    // log det R is a sum of log(1 - rho_j^2); take logs of running products
    // to keep the number of log calls small.
    double prod = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (gaps_[i] == 0.0) {  // first row of a person
        rho_[i] = 0.0;
        scale_[i] = 1.0;
        continue;
      }
      const double r = std::exp(-gaps_[i] * decay);
      const double one_minus = 1.0 - r * r;
      if (!(one_minus > 1e-14)) return pc;
      rho_[i] = r;
      scale_[i] = 1.0 / std::sqrt(one_minus);
      prod *= one_minus;
      if (prod < 1e-200) {
        logdet += std::log(prod);
        prod = 1.0;
      }
    }
    logdet += std::log(prod);
    kernels::ar1_whiten(aug_, dim_, rho_, scale_, white_);
    std::fill(gram_.begin(), gram_.end(), 0.0);
    kernels::gram_upper(white_, dim_, {}, gram_);

    // Rank-one random intercept correction per person with the whitened ones u.
    std::fill(g_.begin(), g_.end(), 0.0);
    for (std::size_t k = 0; k < persons; ++k) {
      double* g = g_.data() + k * dim_;
      double utu = 0.0;
      for (std::size_t i = starts_[k]; i < starts_[k + 1]; ++i) {
        const double u = i == starts_[k] ? 1.0 : (1.0 - rho_[i]) * scale_[i];
        utu += u * u;
        const double* w = white_.data() + i * dim_;
        for (std::size_t j = 0; j < dim_; ++j) g[j] += u * w[j];
      }
      c_[k] = -gamma / (1.0 + gamma * utu);
      logdet += std::log1p(gamma * utu);
    }
    kernels::gram_upper(g_, dim_, c_, gram_);
  }
  kernels::symmetrize_upper(gram_, dim_);

  Eigen::Map<const RowMat> G(gram_.data(), p_ + 1, p_ + 1);
  pc.xtvx = G.topLeftCorner(p_, p_);
  pc.xtvy = G.topRightCorner(p_, 1);
  pc.ytvy = G(p_, p_);
  pc.logdet = logdet;
  pc.ok = std::isfinite(logdet);
  return pc;
}

RemlProblem::Solved RemlProblem::solve(const Pieces& pc, bool want_inverse) const {
  Solved s;
  if (!pc.ok) return s;
  Eigen::LLT<Eigen::MatrixXd> llt(pc.xtvx);
  if (llt.info() != Eigen::Success) return s;
  const auto diag = llt.matrixLLT().diagonal();
  if (!(diag.minCoeff() > 1e-12 * diag.maxCoeff())) return s;
  s.beta = llt.solve(pc.xtvy);
  s.q = pc.ytvy - pc.xtvy.dot(s.beta);
  if (!std::isfinite(s.q) || s.q < -1e-10 * std::abs(pc.ytvy)) return s;
  s.q = std::max(s.q, 0.0);  // an exact fit can round slightly negative
  s.logdet_xtvx = 2.0 * diag.array().log().sum();
  if (want_inverse) s.xtvx_inv = llt.solve(Eigen::MatrixXd::Identity(p_, p_));
  s.ok = true;
  return s;
}

double RemlProblem::profiled(double gamma, double corr_param) const {
  const Pieces pc = pieces(gamma, corr_param);
  const Solved s = solve(pc, false);
  if (!s.ok || !(s.q > 0.0) || n_ == p_) return kInf;
  const double dof = static_cast<double>(n_ - p_);
  return dof * (std::log(s.q / dof) + 1.0) + pc.logdet + s.logdet_xtvx;
}

double RemlProblem::full(const VarianceParams& params) const {
  if (!(params.sigma2 > 0.0) || !(params.sigma_b2 >= 0.0)) return kInf;
  const Pieces pc = pieces(params.sigma_b2 / params.sigma2, params.corr_param);
  const Solved s = solve(pc, false);
  if (!s.ok) return kInf;
  const double dof = static_cast<double>(n_ - p_);
  return dof * std::log(params.sigma2) + pc.logdet + s.logdet_xtvx + s.q / params.sigma2;
}

GlsFit RemlProblem::gls(const VarianceParams& params) const {
  GlsFit fit;
  if (!(params.sigma2 > 0.0) || !(params.sigma_b2 >= 0.0)) return fit;
  const Solved s = solve(pieces(params.sigma_b2 / params.sigma2, params.corr_param), true);
  if (!s.ok) return fit;
  fit.coefficients = s.beta;
  fit.cov = params.sigma2 * s.xtvx_inv;
  fit.ok = true;
  return fit;
}

double reml_objective(const VarianceParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      std::span<const int> person_ids, std::span<const double> times, CorrStructure structure) {
  return RemlProblem(X, y, person_ids, times, structure).full(params);
}

double reml_objective_dense(const VarianceParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            std::span<const int> person_ids, std::span<const double> times,
                            CorrStructure structure) {
  if (!(params.sigma2 > 0.0) || !(params.sigma_b2 >= 0.0) || !valid_corr_param(structure, params.corr_param))
    return kInf;
  CovarianceSpec cov;
  cov.sigma_b2 = params.sigma_b2;
  cov.sigma2 = params.sigma2;
  switch (structure) {
    case CorrStructure::Exchangeable:
      cov.kind = CovKind::Exchangeable;
      break;
    case CorrStructure::CAR1:
      cov.kind = CovKind::CAR1;
      cov.rho = params.corr_param;
      break;
    case CorrStructure::Exponential:
      cov.kind = CovKind::Exponential;
      cov.range = params.corr_param;
      break;
  }

  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::MatrixXd xtvx = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd xtvy = Eigen::VectorXd::Zero(p);
  double ytvy = 0.0, logdet = 0.0;
  Eigen::Index b = 0;
  while (b < n) {
    Eigen::Index e = b + 1;
    while (e < n && person_ids[static_cast<std::size_t>(e)] == person_ids[static_cast<std::size_t>(b)]) ++e;
    const std::vector<double> t(times.begin() + b, times.begin() + e);
    const Eigen::MatrixXd V = marginal_covariance(cov, t);
    Eigen::LLT<Eigen::MatrixXd> llt(V);
    if (llt.info() != Eigen::Success) return kInf;
    logdet += 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const Eigen::MatrixXd wx = llt.matrixL().solve(X.middleRows(b, e - b));
    const Eigen::VectorXd wy = llt.matrixL().solve(y.segment(b, e - b));
    xtvx.noalias() += wx.transpose() * wx;
    xtvy.noalias() += wx.transpose() * wy;
    ytvy += wy.squaredNorm();
    b = e;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(xtvx);
  if (llt.info() != Eigen::Success) return kInf;
  const Eigen::VectorXd beta = llt.solve(xtvy);
  const double q = ytvy - xtvy.dot(beta);
  return logdet + 2.0 * llt.matrixLLT().diagonal().array().log().sum() + q;
}

GlsFit fit_gls(const VarianceParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               std::span<const int> person_ids, std::span<const double> times, CorrStructure structure) {
  return RemlProblem(X, y, person_ids, times, structure).gls(params);
}

LmmFit fit_lmm_reml(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> person_ids,
                    std::span<const double> times, CorrStructure structure, const LmmOptions& options) {
  const RemlProblem problem(X, y, person_ids, times, structure);
  const bool has_corr = structure != CorrStructure::Exchangeable;

  auto corr_from = [&](double z) {
    return structure == CorrStructure::CAR1 ? logistic(z) : std::exp(z);
  };
  auto objective = [&](std::span<const double> th) {
    if (th[0] < kLogGammaLo || th[0] > kLogGammaHi) return kInf;
    double corr = 0.0;
    if (has_corr) {
      const double bound = structure == CorrStructure::CAR1 ? kLogitRhoBound : kLogRangeBound;
      if (std::abs(th[1]) > bound) return kInf;
      corr = corr_from(th[1]);
    }
    return problem.profiled(std::exp(th[0]), corr);
  };

  const std::array<double, 3> gamma0 = {0.5, 0.05, 5.0};
  const std::array<double, 3> corr0 = structure == CorrStructure::CAR1 ? std::array<double, 3>{0.7, 0.3, 0.95}
                                                                       : std::array<double, 3>{3.0, 0.8, 20.0};
  NelderMeadOptions nm;
  nm.rel_tol = options.rel_tol;
  nm.max_evals = options.max_evals_per_start;

  NelderMeadResult best;
  best.value = kInf;
  for (std::size_t s = 0; s < gamma0.size(); ++s) {
    std::vector<double> start = {std::log(gamma0[s])};
    if (has_corr)
      start.push_back(structure == CorrStructure::CAR1 ? std::log(corr0[s] / (1.0 - corr0[s])) : std::log(corr0[s]));
    NelderMeadResult r = nelder_mead(objective, start, nm);
    if (r.value < best.value) best = std::move(r);
  }

  LmmFit fit;
  if (!std::isfinite(best.value)) return fit;
  // Polish from the best solution with a fresh, smaller simplex.
  nm.initial_step = 0.1;
  NelderMeadResult polished = nelder_mead(objective, best.x, nm);
  if (polished.value <= best.value) {
    polished.converged = polished.converged || best.converged;
    best = std::move(polished);
  }

  const double gamma = std::exp(best.x[0]);
  const double corr = has_corr ? corr_from(best.x[1]) : 0.0;
  const RemlProblem::Pieces pc = problem.pieces(gamma, corr);
  const Eigen::MatrixXd& xtvx = pc.xtvx;
  Eigen::LLT<Eigen::MatrixXd> llt(xtvx);
  if (!pc.ok || llt.info() != Eigen::Success) return fit;
  const Eigen::VectorXd beta = llt.solve(pc.xtvy);
  const double q = pc.ytvy - pc.xtvy.dot(beta);
  const double sigma2 = q / static_cast<double>(X.rows() - X.cols());
  if (!(sigma2 > 0.0)) return fit;

  fit.variance.sigma2 = sigma2;
  fit.variance.sigma_b2 = gamma * sigma2;
  fit.variance.corr_param = corr;
  fit.coefficients = beta;
  fit.cov = sigma2 * llt.solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
  fit.cov = 0.5 * (fit.cov + fit.cov.transpose());
  fit.objective = best.value;
  fit.converged = best.converged && fit.cov.allFinite() && fit.coefficients.allFinite();
  return fit;
}

}  // namespace pragsim
