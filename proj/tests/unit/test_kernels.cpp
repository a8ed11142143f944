#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "calibasis/error.hpp"
#include "calibasis/kernels.hpp"

using namespace calibasis;
namespace k = calibasis::kernels;

namespace {

std::vector<double> randv(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

struct IsaGuard {
  k::Isa prev;
  explicit IsaGuard(k::Isa isa) : prev(k::set_active_isa(isa)) {}
  ~IsaGuard() { k::set_active_isa(prev); }
};

std::vector<k::Isa> simd_variants() {
  std::vector<k::Isa> out;
  for (k::Isa isa : {k::Isa::avx2, k::Isa::neon})
    if (k::isa_available(isa)) out.push_back(isa);
  return out;
}

}  // namespace

TEST_CASE("scalar kernel is always available and named") {
  CHECK(k::isa_available(k::Isa::scalar));
  CHECK(k::isa_name(k::Isa::scalar) == "scalar");
  CHECK(k::isa_available(k::best_isa()));
}

TEST_CASE("selecting an unavailable variant throws and keeps the active one") {
  const k::Isa before = k::active_isa();
  for (k::Isa isa : {k::Isa::avx2, k::Isa::neon})
    if (!k::isa_available(isa)) CHECK_THROWS_AS(k::set_active_isa(isa), DomainError);
  CHECK(k::active_isa() == before);
}

TEST_CASE("dot matches a long-double reference for every variant and odd lengths") {
  std::mt19937_64 rng(11);
  std::vector<k::Isa> all = simd_variants();
  all.push_back(k::Isa::scalar);
  for (k::Isa isa : all) {
    IsaGuard g(isa);
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 63u, 100u, 257u}) {
      const auto a = randv(n, rng);
      const auto b = randv(n, rng);
      long double ref = 0;
      double abs_sum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        ref += static_cast<long double>(a[i]) * b[i];
        abs_sum += std::abs(a[i] * b[i]);
      }
      CHECK(std::abs(k::dot(a, b) - static_cast<double>(ref)) <= 1e-14 * (1.0 + abs_sum));
    }
  }
}

TEST_CASE("SIMD variants agree with the scalar reference") {
  std::mt19937_64 rng(12);
  for (k::Isa isa : simd_variants()) {
    CAPTURE(k::isa_name(isa));
    for (std::size_t n : {1u, 3u, 4u, 13u, 60u, 61u}) {
      for (std::size_t p : {1u, 2u, 6u, 9u}) {
        const auto x = randv(p, rng);
        const auto cols = randv(p * n, rng);
        const auto w = randv(p, rng, 0.1, 5.0);
        std::vector<double> ref(n), got(n);
        {
          IsaGuard g(k::Isa::scalar);
          k::weighted_sqdist(x, cols.data(), n, n, w, ref);
        }
        {
          IsaGuard g(isa);
          k::weighted_sqdist(x, cols.data(), n, n, w, got);
        }
        for (std::size_t j = 0; j < n; ++j) CHECK(got[j] == doctest::Approx(ref[j]).epsilon(1e-13));
      }
      auto a = randv(n, rng);
      auto b = randv(n, rng);
      double ref_dot, got_dot;
      {
        IsaGuard g(k::Isa::scalar);
        ref_dot = k::dot(a, b);
      }
      {
        IsaGuard g(isa);
        got_dot = k::dot(a, b);
      }
      CHECK(std::abs(ref_dot - got_dot) <= 1e-13 * (1.0 + std::abs(ref_dot)));
    }
  }
}

TEST_CASE("weighted_sqdist against the definition") {
  std::mt19937_64 rng(13);
  const std::size_t n = 10, p = 3, stride = 12;
  const auto x = randv(p, rng);
  const auto cols = randv(p * stride, rng);
  const auto w = randv(p, rng, 0.5, 2.0);
  std::vector<double> out(n);
  k::weighted_sqdist(x, cols.data(), stride, n, w, out);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0;
    for (std::size_t d = 0; d < p; ++d) s += w[d] * std::pow(x[d] - cols[d * stride + j], 2);
    CHECK(out[j] == doctest::Approx(s).epsilon(1e-14));
  }
}

TEST_CASE("forward substitution solves lower-triangular systems in every variant") {
  std::mt19937_64 rng(14);
  std::vector<k::Isa> all = simd_variants();
  all.push_back(k::Isa::scalar);
  for (k::Isa isa : all) {
    IsaGuard g(isa);
    for (std::size_t n : {1u, 2u, 5u, 33u}) {
      std::vector<double> l(n * n, 0.0);
      std::uniform_real_distribution<double> u(-0.3, 0.3);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) l[i * n + j] = u(rng);
        l[i * n + i] = 1.0 + std::abs(u(rng));
      }
      const auto y_true = randv(n, rng);
      std::vector<double> b(n, 0.0), y(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) b[i] += l[i * n + j] * y_true[j];
      k::forward_substitution(l.data(), n, b, y);
      for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(y_true[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("exp_neg is elementwise exp(-x)") {
  std::vector<double> v = {0.0, 0.5, 3.0, 700.0};
  k::exp_neg(v);
  CHECK(v[0] == 1.0);
  CHECK(v[1] == doctest::Approx(std::exp(-0.5)));
  CHECK(v[2] == doctest::Approx(std::exp(-3.0)));
  CHECK(v[3] >= 0.0);
}
