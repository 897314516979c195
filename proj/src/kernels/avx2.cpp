#include <immintrin.h>

#include <algorithm>
#include <vector>

#include "pragsim/kernels.hpp"

namespace pragsim::kernels::avx2 {

void gram_upper(std::span<const double> rows, std::size_t dim,
                std::span<const double> weights, std::span<double> gram) {
  const std::size_t n = dim == 0 ? 0 : rows.size() / dim;
  if (n == 0) return;
  // Accumulate full 4-wide column blocks of every row i in a padded local
  // buffer, four data rows at a time, then add the upper triangle to `gram`.
  constexpr std::size_t kRows = 4;
  const std::size_t nb = (dim + 3) / 4;
  const std::size_t width = nb * 4;
  std::vector<double> acc(dim * width, 0.0);
  std::vector<double> pad(kRows * width, 0.0);
  std::vector<double> wz(kRows * dim, 0.0);

  for (std::size_t r0 = 0; r0 < n; r0 += kRows) {
    const std::size_t m = std::min(kRows, n - r0);
    for (std::size_t k = 0; k < kRows; ++k) {
      double* pr = pad.data() + k * width;
      double* wr = wz.data() + k * dim;
      if (k < m) {
        const double* z = rows.data() + (r0 + k) * dim;
        const double w = weights.empty() ? 1.0 : weights[r0 + k];
        for (std::size_t c = 0; c < dim; ++c) {
          pr[c] = z[c];
          wr[c] = w * z[c];
        }
      } else {
        for (std::size_t c = 0; c < dim; ++c) pr[c] = wr[c] = 0.0;
      }
    }
    const double* p0 = pad.data();
    const double* p1 = p0 + width;
    const double* p2 = p1 + width;
    const double* p3 = p2 + width;
    for (std::size_t i = 0; i < dim; ++i) {
      const __m256d a0 = _mm256_set1_pd(wz[i]);
      const __m256d a1 = _mm256_set1_pd(wz[dim + i]);
      const __m256d a2 = _mm256_set1_pd(wz[2 * dim + i]);
      const __m256d a3 = _mm256_set1_pd(wz[3 * dim + i]);
      double* g = acc.data() + i * width;
      for (std::size_t j = (i / 4) * 4; j < width; j += 4) {
        __m256d v = _mm256_loadu_pd(g + j);
        v = _mm256_fmadd_pd(a0, _mm256_loadu_pd(p0 + j), v);
        v = _mm256_fmadd_pd(a1, _mm256_loadu_pd(p1 + j), v);
        v = _mm256_fmadd_pd(a2, _mm256_loadu_pd(p2 + j), v);
        v = _mm256_fmadd_pd(a3, _mm256_loadu_pd(p3 + j), v);
        _mm256_storeu_pd(g + j, v);
      }
    }
  }
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = i; j < dim; ++j) gram[i * dim + j] += acc[i * width + j];
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
    const __m256d pv = _mm256_set1_pd(p);
    const __m256d sv = _mm256_set1_pd(s);
    std::size_t c = 0;
    for (; c + 4 <= dim; c += 4) {
      // (cur - p*prev) * s, with the subtraction fused.
      __m256d d = _mm256_fnmadd_pd(pv, _mm256_loadu_pd(prev + c), _mm256_loadu_pd(cur + c));
      _mm256_storeu_pd(o + c, _mm256_mul_pd(d, sv));
    }
    for (; c < dim; ++c) o[c] = (cur[c] - p * prev[c]) * s;
  }
}

}  // namespace pragsim::kernels::avx2
