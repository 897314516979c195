#include <span>
#include <vector>

#include "pragsim/estimators.hpp"
#include "pragsim/kernels.hpp"

namespace pragsim {

OlsFit fit_ols_sandwich(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<int>& clusters,
                        const Eigen::VectorXd& weights) {
  const auto n = X.rows();
  const auto p = X.cols();
  const auto dim = static_cast<std::size_t>(p + 1);

  // Row-major [X | y] so the weighted Gram gives X'WX, X'Wy and y'Wy at once.
  std::vector<double> aug(static_cast<std::size_t>(n) * dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    double* row = aug.data() + static_cast<std::size_t>(i) * dim;
    for (Eigen::Index j = 0; j < p; ++j) row[j] = X(i, j);
    row[p] = y[i];
  }
  std::vector<double> gram(dim * dim, 0.0);
  kernels::gram_upper(aug, dim, std::span<const double>(weights.data(), static_cast<std::size_t>(n)), gram);
  kernels::symmetrize_upper(gram, dim);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> G(gram.data(), p + 1, p + 1);

  OlsFit fit;
  const Eigen::MatrixXd B = G.topLeftCorner(p, p);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(B);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-12 * ldlt.vectorD().maxCoeff()) {
    return fit;
  }
  fit.coefficients = ldlt.solve(G.topRightCorner(p, 1));
  const Eigen::MatrixXd B_inv = ldlt.solve(Eigen::MatrixXd::Identity(p, p));

  // Cluster scores X_c' W_c r_c, one row per cluster.
  const Eigen::VectorXd resid = y - X * fit.coefficients;
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(n * p));
  Eigen::VectorXd s(p);
  Eigen::Index i = 0;
  while (i < n) {
    s.setZero();
    const int id = clusters[static_cast<std::size_t>(i)];
    while (i < n && clusters[static_cast<std::size_t>(i)] == id) {
      s.noalias() += (weights[i] * resid[i]) * X.row(i).transpose();
      ++i;
    }
    scores.insert(scores.end(), s.data(), s.data() + p);
  }
  const auto pu = static_cast<std::size_t>(p);
  std::vector<double> meat(pu * pu, 0.0);
  kernels::gram_upper(scores, pu, {}, meat);
  kernels::symmetrize_upper(meat, pu);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> M(meat.data(), p, p);

  fit.cov = B_inv * M * B_inv;
  fit.cov = 0.5 * (fit.cov + fit.cov.transpose());
  fit.ok = true;
  return fit;
}

}  // namespace pragsim
