#include <atomic>
#include <cmath>

#include "calibasis/error.hpp"
#include "calibasis/kernels.hpp"
#include "internal.hpp"

namespace calibasis::kernels {
namespace {

using detail::Table;

Table table_for(Isa isa) {
  switch (isa) {
#ifdef CALIBASIS_HAVE_AVX2
    case Isa::avx2:
      return {detail::avx2::dot, detail::avx2::sqdist};
#endif
#ifdef CALIBASIS_HAVE_NEON
    case Isa::neon:
      return {detail::neon::dot, detail::neon::sqdist};
#endif
    default:
      return {detail::scalar::dot, detail::scalar::sqdist};
  }
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{best_isa()};
  return isa;
}

// Looked up on every call so that set_active_isa takes effect immediately.
Table current() { return table_for(active().load(std::memory_order_relaxed)); }

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(CALIBASIS_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#ifdef CALIBASIS_HAVE_NEON
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa best_isa() {
  if (isa_available(Isa::avx2)) return Isa::avx2;
  if (isa_available(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

Isa active_isa() { return active().load(); }

Isa set_active_isa(Isa isa) {
  if (!isa_available(isa))
    throw DomainError("kernel ISA '" + std::string(isa_name(isa)) + "' is not available");
  return active().exchange(isa);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: length mismatch");
  return current().dot(a.data(), b.data(), a.size());
}

void weighted_sqdist(std::span<const double> x, const double* cols, std::size_t stride,
                     std::size_t n, std::span<const double> w, std::span<double> out) {
  if (w.size() != x.size() || out.size() < n)
    throw DimensionMismatch("weighted_sqdist: inconsistent sizes");
  current().sqdist(x.data(), cols, stride, n, x.size(), w.data(), out.data());
}

void forward_substitution(const double* lower, std::size_t n, std::span<const double> b,
                          std::span<double> y) {
  if (b.size() != n || y.size() != n)
    throw DimensionMismatch("forward_substitution: inconsistent sizes");
  const auto dotfn = current().dot;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = lower + i * n;
    y[i] = (b[i] - dotfn(row, y.data(), i)) / row[i];
  }
}

void exp_neg(std::span<double> x) {
  for (double& v : x) v = std::exp(-v);
}

}  // namespace calibasis::kernels
