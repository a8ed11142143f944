#pragma once

#include <string>
#include <vector>

#include "calibasis/types.hpp"

namespace calibasis {

struct RegressorSpec {
  enum class Kind { constant, linear, monomials };
  Kind kind = Kind::linear;
  // For monomials: one exponent vector of length p per term.
  std::vector<std::vector<int>> powers;

  Index count(Index inputs) const;
  Vector evaluate(const Vector& x) const;
  Matrix evaluate_rows(const Matrix& x) const;  // n x h
};

enum class FitMode { fixed, maximum_likelihood };

struct GpSpec {
  RegressorSpec regressors;
  // Fixed mode: required (one per input, or a single value for all).
  // ML mode: ignored.
  std::vector<double> lengthscales;
  // Relative to the process variance.
  double nugget = 1e-6;
  FitMode mode = FitMode::maximum_likelihood;
  // Box for ML lengthscales, in input units.
  double min_lengthscale = 0.05;
  double max_lengthscale = 20.0;
  int max_iterations = 200;

  void validate(Index inputs) const;
};

struct GpPrediction {
  double mean;
  double variance;
};

struct LooEntry {
  double residual;     // observed minus predicted
  double variance;
  double standardized;
};

// -n/2 log sigma^2 - 1/2 log|R + nugget I| with beta and sigma^2 profiled out.
// Returns -inf where the correlation matrix cannot be factorised.
double concentrated_log_likelihood(const Matrix& x, const Vector& y, const RegressorSpec& reg,
                                   double nugget, const Vector& log_lengthscales,
                                   Vector* gradient = nullptr);

// Scalar Gaussian process with squared-exponential correlation
// exp(-sum_d ((x_d - x'_d) / phi_d)^2).
class CoefficientEmulator {
 public:
  CoefficientEmulator() = default;
  static CoefficientEmulator fit(const Matrix& x, const Vector& y, const GpSpec& spec);
  // Rebuilds an emulator from stored hyperparameters; spec is kept as recorded.
  static CoefficientEmulator with_lengthscales(const Matrix& x, const Vector& y, const GpSpec& spec,
                                               const Vector& lengthscales,
                                               std::string warning = {});

  GpPrediction predict(const Vector& x) const;
  std::vector<LooEntry> loo() const;

  const GpSpec& spec() const { return spec_; }
  const Matrix& inputs() const { return x_; }
  const Vector& targets() const { return y_; }
  const Vector& lengthscales() const { return phi_; }
  const Vector& beta() const { return beta_; }
  double sigma2() const { return sigma2_; }
  double log_likelihood() const { return loglik_; }
  double condition_number() const { return cond_; }
  const std::string& warning() const { return warning_; }
  bool fitted() const { return x_.rows() > 0; }

 private:
  void factorise();

  GpSpec spec_;
  Matrix x_;   // n x p, column-major: each input dimension contiguous
  Vector y_;
  Vector phi_;
  Vector inv_phi2_;
  Vector beta_;
  double sigma2_ = 0.0;
  double loglik_ = 0.0;
  double cond_ = 0.0;
  std::string warning_;
  RowMatrix lower_;   // Cholesky factor of R + nugget I, row-major for the kernels
  Vector alpha_;      // A^{-1} (y - H beta)
  Matrix h_white_;    // L^{-1} H
  Eigen::LLT<Matrix> hh_;  // of H^T A^{-1} H
};

// Per-dimension median of pairwise absolute differences.
Vector median_distance_lengthscales(const Matrix& x);

}  // namespace calibasis
