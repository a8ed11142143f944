#pragma once

#include <optional>
#include <string>
#include <vector>

#include "calibasis/types.hpp"
#include "calibasis/weight_matrix.hpp"

namespace calibasis {

// n runs of a simulator with p inputs and length-l outputs.
class Ensemble {
 public:
  Ensemble() = default;
  // design: n x p, outputs: l x n (one column per run).
  Ensemble(Matrix design, Matrix outputs);

  Index runs() const { return outputs_.cols(); }
  Index inputs() const { return design_.cols(); }
  Index length() const { return outputs_.rows(); }

  const Matrix& design() const { return design_; }
  const Matrix& outputs() const { return outputs_; }
  const Vector& mean() const { return mean_; }
  // outputs minus the ensemble mean, column by column.
  const Matrix& centred() const { return centred_; }

 private:
  Matrix design_;
  Matrix outputs_;
  Vector mean_;
  Matrix centred_;
};

// An ordered l x k set of basis vectors. May carry the weight matrix under
// which it is known to be orthonormal, which enables cheaper projections.
class Basis {
 public:
  Basis() = default;
  explicit Basis(Matrix vectors);
  // Caller asserts B^T W^{-1} B = I; verified to 1e-8.
  static Basis orthonormal(Matrix vectors, const WeightMatrix& w);

  Index size() const { return vectors_.cols(); }
  Index length() const { return vectors_.rows(); }
  bool empty() const { return vectors_.cols() == 0; }
  const Matrix& vectors() const { return vectors_; }
  auto col(Index k) const { return vectors_.col(k); }
  bool is_orthonormal() const { return orthonormal_under_.has_value(); }

  // First k vectors.
  Basis leading(Index k) const;
  // Vectors k.. to the end.
  Basis trailing(Index k) const;
  // This basis followed by other; the result is flagged orthonormal only if
  // both parts are and they are mutually W-orthogonal to 1e-8.
  Basis concat(const Basis& other) const;

 private:
  Matrix vectors_;
  std::optional<WeightMatrix> orthonormal_under_;
  friend Basis mark_orthonormal(Basis, const WeightMatrix&);
};

// Attaches the orthonormal flag without re-checking.
Basis mark_orthonormal(Basis b, const WeightMatrix& w);

double w_norm(const Vector& v, const WeightMatrix& w);
double w_inner(const Vector& a, const Vector& b, const WeightMatrix& w);

// Coefficients c = (B^T W^{-1} B)^{-1} B^T W^{-1} v.
Vector w_project(const Basis& b, const WeightMatrix& w, const Vector& v);
// Same for every column of V.
Matrix w_project(const Basis& b, const WeightMatrix& w, const Matrix& v);

Vector reconstruct(const Basis& b, const Vector& coefficients, const Vector& mean);

// ||v - B c||_W with c the W-projection of v. v is an anomaly (already centred).
double reconstruction_error(const Basis& b, const WeightMatrix& w, const Vector& v);

// Share of the ensemble's weighted variance explained by one vector.
double variance_explained_single(const Vector& b, const WeightMatrix& w, const Matrix& centred);
// Share explained by the span of the basis.
double variance_explained(const Basis& b, const WeightMatrix& w, const Matrix& centred);

struct WsvdResult {
  Basis basis;                      // l x r, W-orthonormal
  Matrix left;                      // n x r
  Vector singular_values;           // r, nonincreasing, all above the drop tolerance
  Vector dropped_singular_values;   // near-zero values not turned into vectors
  Vector coefficient_variances;     // d_k^2 / (n - 1)
  std::string diagnostic;
};

// Relative tolerance below which singular values are treated as zero.
inline constexpr double kSingularDropTolerance = 1e-10;

// Weighted SVD of an l x n centred ensemble. Degenerate input (no variation)
// yields an empty basis and a diagnostic.
WsvdResult wsvd(const Matrix& centred, const WeightMatrix& w);

// W-SVD of the part of the ensemble not explained by fixed. The drop
// tolerance is relative to the largest singular value of the full ensemble.
WsvdResult residual_basis(const Matrix& centred, const Basis& fixed, const WeightMatrix& w);

enum class DependentPolicy { error, drop };

struct GramSchmidtResult {
  Basis basis;
  std::vector<Index> kept;  // source column of each output vector
};

GramSchmidtResult gram_schmidt_w(const Basis& b, const WeightMatrix& w,
                                 DependentPolicy policy = DependentPolicy::drop,
                                 double tolerance = 1e-12);

// Smallest k with V(B_k) >= target; size() if the target is never met.
Index truncation_for_variance(const Basis& b, const WeightMatrix& w, const Matrix& centred,
                              double target);

struct VarMseRow {
  Index k;
  double variance_explained;
  double reconstruction_error;
  double threshold;
};

std::vector<VarMseRow> varmse_table(const Basis& b, const WeightMatrix& w, const Vector& z_anomaly,
                                    const Matrix& centred, double threshold);

}  // namespace calibasis
