#include <immintrin.h>

#include "internal.hpp"

namespace calibasis::kernels::detail::avx2 {

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  acc0 = _mm256_add_pd(acc0, acc1);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc0);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void sqdist(const double* x, const double* cols, std::size_t stride, std::size_t n,
            std::size_t p, const double* w, double* out) {
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t d = 0; d < p; ++d) {
      const __m256d diff =
          _mm256_sub_pd(_mm256_set1_pd(x[d]), _mm256_loadu_pd(cols + d * stride + j));
      acc = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_set1_pd(w[d]), diff), diff, acc);
    }
    _mm256_storeu_pd(out + j, acc);
  }
  for (; j < n; ++j) {
    double s = 0.0;
    for (std::size_t d = 0; d < p; ++d) {
      const double diff = x[d] - cols[d * stride + j];
      s += w[d] * diff * diff;
    }
    out[j] = s;
  }
}

}  // namespace calibasis::kernels::detail::avx2
