#include "calibasis/toy_model.hpp"

#include <cmath>
#include <numbers>

#include "calibasis/design.hpp"
#include "calibasis/error.hpp"
#include "calibasis/rng.hpp"

namespace calibasis {

ToyPatternSet make_toy_patterns(std::uint64_t seed) {
  Matrix raw(kToyLength, kToyPatterns);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < kToyLength; ++i) {
    const Index r = toy_row(i);
    const Index c = toy_col(i);
    raw(i, 0) = r == c ? 1.0 : 0.0;
    raw(i, 1) = std::abs(r - c) == 1 ? 1.0 : 0.0;
  }
  for (Index k = 2; k < kToyPatterns; ++k)
    for (Index i = 0; i < kToyLength; ++i) raw(i, k) = normal(rng);
  // Modified Gram-Schmidt, two passes.
  for (Index k = 0; k < kToyPatterns; ++k) {
    for (int pass = 0; pass < 2; ++pass)
      for (Index j = 0; j < k; ++j) raw.col(k) -= raw.col(j).dot(raw.col(k)) * raw.col(j);
    raw.col(k).normalize();
  }
  return {raw, seed};
}

Vector toy_coefficients(const Vector& theta) {
  if (theta.size() != kToyInputs)
    throw DimensionMismatch("toy model expects 6 inputs, got " + std::to_string(theta.size()));
  const double x1 = theta[0], x2 = theta[1], x3 = theta[2], x4 = theta[3], x5 = theta[4],
               x6 = theta[5];
  if (x6 == -1.3) throw DomainError("toy model: x6 = -1.3 makes the phi_1 term undefined");
  const double dens = std::exp(-0.5 * std::pow((x4 - 0.2) / 0.1, 2)) /
                      (0.1 * std::sqrt(2.0 * std::numbers::pi));
  Vector c(kToyPatterns + 1);
  c[0] = 1.5 * dens * x5 / (1.3 + x6);
  c[1] = 3.0 * (10.0 * x2 * x2 + 5.0 * x3 * x3);
  c[2] = 3.0 * (x3 + 1.5 * x1 * x2);
  c[3] = 3.0 * 2.0 * x2;
  c[4] = 3.0 * x3 * x1;
  c[5] = 3.0 * x2 * x1;
  c[6] = 3.0 * x2 * x2 * x2;
  c[7] = 3.0 * (x2 + x3) * (x2 + x3);
  c[8] = 3.0 * 2.0;
  return c;
}

namespace {

Matrix design_matrix(const ToyPatternSet& patterns, double amplitude) {
  if (patterns.phi.rows() != kToyLength || patterns.phi.cols() != kToyPatterns)
    throw DimensionMismatch("toy patterns must be 100 x 8");
  Matrix a(kToyLength, kToyPatterns + 1);
  a.leftCols(kToyPatterns) = amplitude * patterns.phi;
  a.col(kToyPatterns).setOnes();
  return a;
}

}  // namespace

Vector toy_f(const Vector& theta, const ToyPatternSet& patterns, const ToyConfig& cfg,
             std::optional<std::uint64_t> noise_seed) {
  Vector f = design_matrix(patterns, cfg.amplitude) * toy_coefficients(theta);
  if (noise_seed && cfg.noise_sd > 0.0) {
    Rng rng(*noise_seed);
    std::normal_distribution<double> normal(0.0, cfg.noise_sd);
    for (Index i = 0; i < f.size(); ++i) f[i] += normal(rng);
  }
  return f;
}

Matrix toy_ensemble(const Matrix& design, const ToyPatternSet& patterns, const ToyConfig& cfg,
                    std::uint64_t seed) {
  if (design.cols() != kToyInputs) throw DimensionMismatch("toy design must have 6 columns");
  Matrix out(kToyLength, design.rows());
  for (Index j = 0; j < design.rows(); ++j)
    out.col(j) = toy_f(design.row(j).transpose(), patterns, cfg,
                       derive_seed(seed, static_cast<std::uint64_t>(j)));
  return out;
}

Matrix toy_correlation() {
  Matrix c(kToyLength, kToyLength);
  for (Index i = 0; i < kToyLength; ++i)
    for (Index j = 0; j < kToyLength; ++j) {
      const double dr = static_cast<double>(toy_row(i) - toy_row(j));
      const double dc = static_cast<double>(toy_col(i) - toy_col(j));
      c(i, j) = std::exp(-dr * dr - dc * dc);
    }
  return c;
}

WeightMatrix toy_sigma_e() { return WeightMatrix::dense_with_jitter(toy_correlation(), 1e-8); }

WeightMatrix toy_sigma_eta() {
  Matrix c = toy_correlation();
  Vector v(kToyLength);
  for (Index i = 0; i < kToyLength; ++i) v[i] = toy_row(i) == toy_col(i) ? 0.1 : 1.0;
  c = v.asDiagonal() * c * v.asDiagonal();
  return WeightMatrix::dense_with_jitter(c, 1e-8);
}

Vector toy_observe(const ToyPatternSet& patterns, const ToyConfig& cfg) {
  Vector z = toy_f(cfg.theta_star, patterns, cfg);
  if (!cfg.observation_noise) return z;
  Rng rng(derive_seed(cfg.seed, 0x6f6273ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector e(kToyLength);
  for (Index i = 0; i < kToyLength; ++i) e[i] = normal(rng);
  return z + toy_sigma_e().cholesky_lower() * e;
}

double toy_true_implausibility(const Vector& theta, const ToyPatternSet& patterns,
                               const ToyConfig& cfg, const Vector& z, const WeightMatrix& w) {
  return w.quadratic(Vector(z - toy_f(theta, patterns, cfg)));
}

TrueNroy true_nroy_oracle(const ToyPatternSet& patterns, const ToyConfig& cfg, const Vector& z,
                          double threshold, Index samples, std::uint64_t seed) {
  if (z.size() != kToyLength) throw DimensionMismatch("toy observation must have length 100");
  const WeightMatrix w = toy_sigma_e().plus(toy_sigma_eta());
  // I(theta) is a quadratic form in the 9 coefficients.
  const Matrix at = w.whiten(design_matrix(patterns, cfg.amplitude));
  const Vector zt = w.whiten(z);
  const Matrix g = at.transpose() * at;
  const Vector a = at.transpose() * zt;
  const double z2 = zt.squaredNorm();
  TrueNroy out;
  out.samples = samples;
  out.samples_matrix = uniform_samples(samples, kToyInputs, seed);
  out.accepted.assign(static_cast<std::size_t>(samples), 0);
  Index count = 0;
#pragma omp parallel for reduction(+ : count) schedule(static)
  for (Index i = 0; i < samples; ++i) {
    const Vector c = toy_coefficients(out.samples_matrix.row(i).transpose());
    const double imp = z2 - 2.0 * c.dot(a) + c.dot(g * c);
    if (imp <= threshold) {
      out.accepted[static_cast<std::size_t>(i)] = 1;
      ++count;
    }
  }
  out.fraction = static_cast<double>(count) / static_cast<double>(samples);
  out.standard_error = std::sqrt(out.fraction * (1.0 - out.fraction) / static_cast<double>(samples));
  return out;
}

}  // namespace calibasis
