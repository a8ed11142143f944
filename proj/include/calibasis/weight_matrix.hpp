#pragma once

#include <memory>

#include "calibasis/types.hpp"

namespace calibasis {

// Symmetric positive-definite weight W with a cached Cholesky factor.
// Immutable; copies share the factorisation.
class WeightMatrix {
 public:
  enum class Form { diagonal, dense };

  static WeightMatrix identity(Index n);
  static WeightMatrix diagonal(const Vector& variances);
  // Validates symmetry and factorises. Throws NotSymmetric / NotPositiveDefinite.
  static WeightMatrix dense(const Matrix& w);
  // As dense(), but adds up to max_jitter * mean(diag) on the diagonal when
  // the matrix is only semi-definite in floating point.
  static WeightMatrix dense_with_jitter(const Matrix& w, double max_jitter = 1e-8);

  WeightMatrix() = default;

  Index dim() const;
  Form form() const;
  bool is_diagonal() const { return form() == Form::diagonal; }

  Matrix to_dense() const;
  // Only meaningful for diagonal form; for dense form returns the diagonal.
  Vector diagonal_entries() const;
  double jitter() const;

  // L^{-1} x where W = L L^T.
  Vector whiten(const Vector& x) const;
  Matrix whiten(const Matrix& x) const;
  // L x.
  Matrix unwhiten(const Matrix& x) const;
  Vector unwhiten(const Vector& x) const;
  // W^{-1} x.
  Vector solve(const Vector& x) const;
  Matrix solve(const Matrix& x) const;
  // x^T W^{-1} x.
  double quadratic(const Vector& x) const;

  double log_determinant() const;
  double condition_estimate() const;

  WeightMatrix scaled(double factor) const;
  WeightMatrix plus(const WeightMatrix& other) const;

  // Lower Cholesky factor (dense form) or sqrt of the diagonal.
  const Matrix& cholesky_lower() const;

 private:
  struct Impl;
  explicit WeightMatrix(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  const Impl& impl() const;
  std::shared_ptr<const Impl> impl_;
};

}  // namespace calibasis
