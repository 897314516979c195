#pragma once
// Shared fixtures for the unit tests.

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "pragsim/cohort.hpp"
#include "pragsim/dgp.hpp"

namespace testing {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

// Small longitudinal instance: rows grouped by person, times increasing.
struct Instance {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<int> ids;
  std::vector<double> times;
};

inline Instance random_instance(std::mt19937_64& rng, int persons, int max_rows, int p) {
  std::uniform_int_distribution<int> count(1, max_rows);
  std::uniform_real_distribution<double> gap(0.05, 2.0);
  std::normal_distribution<double> n(0.0, 1.0);
  Instance in;
  std::vector<double> t;
  for (int i = 0; i < persons; ++i) {
    const int m = count(rng);
    double time = 3.0 + gap(rng);
    for (int j = 0; j < m; ++j) {
      in.ids.push_back(i);
      in.times.push_back(time);
      time += gap(rng);
    }
  }
  const auto rows = static_cast<Eigen::Index>(in.ids.size());
  in.X = random_matrix(rng, rows, p);
  in.X.col(0).setOnes();
  in.y.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) in.y[r] = n(rng) + 0.3 * in.times[static_cast<std::size_t>(r)];
  return in;
}

// Small cohort from the calibrated generator, shared across tests.
inline const pragsim::Cohort& small_cohort() {
  static const pragsim::Cohort c = pragsim::generate_cohort(pragsim::default_generator_params(), 5000, 77);
  return c;
}

}  // namespace testing
