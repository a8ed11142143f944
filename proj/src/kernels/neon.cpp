#include <arm_neon.h>

#include "internal.hpp"

namespace calibasis::kernels::detail::neon {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void sqdist(const double* x, const double* cols, std::size_t stride, std::size_t n,
            std::size_t p, const double* w, double* out) {
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t d = 0; d < p; ++d) {
      const float64x2_t diff = vsubq_f64(vdupq_n_f64(x[d]), vld1q_f64(cols + d * stride + j));
      acc = vfmaq_f64(acc, vmulq_n_f64(diff, w[d]), diff);
    }
    vst1q_f64(out + j, acc);
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

}  // namespace calibasis::kernels::detail::neon
