#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Hot inner loops with a scalar reference and optional SIMD variants.
// The variant is picked once per process from CPU features; tests can
// force a specific one.
namespace calibasis::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);
bool isa_available(Isa isa);
Isa best_isa();
Isa active_isa();
// Returns the previously active ISA. Throws DomainError if unavailable.
Isa set_active_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);

// out[j] = sum_d w[d] * (x[d] - cols[d * stride + j])^2 for j < n.
// cols is dimension-major: each input dimension is a contiguous run.
void weighted_sqdist(std::span<const double> x, const double* cols, std::size_t stride,
                     std::size_t n, std::span<const double> w, std::span<double> out);

// Solves L y = b for lower-triangular L stored row-major (n x n).
void forward_substitution(const double* lower_rowmajor, std::size_t n,
                          std::span<const double> b, std::span<double> y);

// In-place x -> exp(-x).
void exp_neg(std::span<double> x);

}  // namespace calibasis::kernels
