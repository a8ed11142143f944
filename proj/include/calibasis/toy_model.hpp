#pragma once

#include <cstdint>
#include <optional>

#include "calibasis/weight_matrix.hpp"

namespace calibasis {

inline constexpr Index kToyGrid = 10;
inline constexpr Index kToyLength = kToyGrid * kToyGrid;
inline constexpr Index kToyInputs = 6;
inline constexpr Index kToyPatterns = 8;

struct ToyPatternSet {
  Matrix phi;  // 100 x 8, Euclidean-orthonormal columns
  std::uint64_t seed = 0;
};

// phi_1: main-diagonal indicator. phi_2: band one cell off the diagonal.
// phi_3..phi_8: seeded white-noise fields. All Gram-Schmidt orthonormalised in order.
ToyPatternSet make_toy_patterns(std::uint64_t seed);

struct ToyConfig {
  Vector theta_star = (Vector(6) << 0.7, 0.01, 0.01, 0.25, 0.8, -0.9).finished();
  double noise_sd = 0.05;
  // Multiplier applied to every pattern (patterns themselves are unit norm).
  double amplitude = 2.0;
  bool observation_noise = true;
  std::uint64_t seed = 1;
};

// Coefficients of (phi_1..phi_8, constant) at theta.
Vector toy_coefficients(const Vector& theta);

// Noise-free when noise_seed is empty or noise_sd is 0.
Vector toy_f(const Vector& theta, const ToyPatternSet& patterns, const ToyConfig& cfg,
             std::optional<std::uint64_t> noise_seed = std::nullopt);

// l x n outputs for the rows of design; run j uses a noise seed derived from (seed, j).
Matrix toy_ensemble(const Matrix& design, const ToyPatternSet& patterns, const ToyConfig& cfg,
                    std::uint64_t seed);

// Grid coordinates of flattened index i (row-major).
inline Index toy_row(Index i) { return i / kToyGrid; }
inline Index toy_col(Index i) { return i % kToyGrid; }

Matrix toy_correlation();
WeightMatrix toy_sigma_e();
WeightMatrix toy_sigma_eta();

// z = f(theta*) + chol(Sigma_e) N(0, I) using cfg.seed for the draw.
Vector toy_observe(const ToyPatternSet& patterns, const ToyConfig& cfg);

struct TrueNroy {
  double fraction = 0.0;
  double standard_error = 0.0;
  Index samples = 0;
  Matrix samples_matrix;
  std::vector<char> accepted;
};

// I(theta) = (z - f(theta))^T (Sigma_e + Sigma_eta)^{-1} (z - f(theta)) with no
// emulator variance, over uniform samples of [-1, 1]^6.
TrueNroy true_nroy_oracle(const ToyPatternSet& patterns, const ToyConfig& cfg, const Vector& z,
                          double threshold, Index samples, std::uint64_t seed);

// Exact implausibility for one theta, used to cross-check the oracle.
double toy_true_implausibility(const Vector& theta, const ToyPatternSet& patterns,
                               const ToyConfig& cfg, const Vector& z, const WeightMatrix& w);

}  // namespace calibasis
