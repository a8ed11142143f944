#include "internal.hpp"

namespace calibasis::kernels::detail::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void sqdist(const double* x, const double* cols, std::size_t stride, std::size_t n,
            std::size_t p, const double* w, double* out) {
  for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
  for (std::size_t d = 0; d < p; ++d) {
    const double* c = cols + d * stride;
    const double xd = x[d];
    const double wd = w[d];
    for (std::size_t j = 0; j < n; ++j) {
      const double diff = xd - c[j];
      out[j] += wd * diff * diff;
    }
  }
}

}  // namespace calibasis::kernels::detail::scalar
