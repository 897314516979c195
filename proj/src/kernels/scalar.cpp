#include "pragsim/kernels.hpp"

namespace pragsim::kernels::scalar {

void gram_upper(std::span<const double> rows, std::size_t dim,
                std::span<const double> weights, std::span<double> gram) {
  const std::size_t n = dim == 0 ? 0 : rows.size() / dim;
  for (std::size_t r = 0; r < n; ++r) {
    const double* z = rows.data() + r * dim;
    const double w = weights.empty() ? 1.0 : weights[r];
    for (std::size_t i = 0; i < dim; ++i) {
      const double a = w * z[i];
      double* g = gram.data() + i * dim;
      for (std::size_t j = i; j < dim; ++j) g[j] += a * z[j];
    }
  }
}

void ar1_whiten(std::span<const double> in, std::size_t dim,
                std::span<const double> rho, std::span<const double> scale,
                std::span<double> out) {
  const std::size_t n = dim == 0 ? 0 : in.size() / dim;
  if (n == 0) return;
  for (std::size_t c = 0; c < dim; ++c) out[c] = in[c];
  for (std::size_t r = 1; r < n; ++r) {
    const double* cur = in.data() + r * dim;
    const double* prev = cur - dim;
    double* o = out.data() + r * dim;
    const double p = rho[r];
    const double s = scale[r];
    for (std::size_t c = 0; c < dim; ++c) o[c] = (cur[c] - p * prev[c]) * s;
  }
}

}  // namespace pragsim::kernels::scalar
