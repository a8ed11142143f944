#pragma once

#include <cstddef>

namespace calibasis::kernels::detail {

using DotFn = double (*)(const double*, const double*, std::size_t);
using SqdistFn = void (*)(const double* x, const double* cols, std::size_t stride,
                          std::size_t n, std::size_t p, const double* w, double* out);

struct Table {
  DotFn dot;
  SqdistFn sqdist;
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void sqdist(const double* x, const double* cols, std::size_t stride, std::size_t n,
            std::size_t p, const double* w, double* out);
}  // namespace scalar

#ifdef CALIBASIS_HAVE_AVX2
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void sqdist(const double* x, const double* cols, std::size_t stride, std::size_t n,
            std::size_t p, const double* w, double* out);
}  // namespace avx2
#endif

#ifdef CALIBASIS_HAVE_NEON
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
void sqdist(const double* x, const double* cols, std::size_t stride, std::size_t n,
            std::size_t p, const double* w, double* out);
}  // namespace neon
#endif

}  // namespace calibasis::kernels::detail
