#include "calibasis/basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "calibasis/error.hpp"

namespace calibasis {

Ensemble::Ensemble(Matrix design, Matrix outputs)
    : design_(std::move(design)), outputs_(std::move(outputs)) {
  if (design_.rows() != outputs_.cols())
    throw DimensionMismatch("ensemble design has " + std::to_string(design_.rows()) +
                            " rows but there are " + std::to_string(outputs_.cols()) + " runs");
  if (outputs_.cols() == 0 || outputs_.rows() == 0)
    throw DimensionMismatch("ensemble must contain at least one run of nonzero length");
  if (!outputs_.allFinite()) throw DomainError("ensemble outputs contain non-finite values");
  mean_ = outputs_.rowwise().mean();
  centred_ = outputs_.colwise() - mean_;
  // Constant rows centre to exact zeros so that degenerate ensembles stay degenerate.
  for (Index i = 0; i < outputs_.rows(); ++i) {
    if (outputs_.row(i).maxCoeff() == outputs_.row(i).minCoeff()) {
      mean_[i] = outputs_(i, 0);
      centred_.row(i).setZero();
    }
  }
}

Basis::Basis(Matrix vectors) : vectors_(std::move(vectors)) {
  if (!vectors_.allFinite()) throw DomainError("basis contains non-finite values");
}

Basis mark_orthonormal(Basis b, const WeightMatrix& w) {
  if (b.length() != w.dim() && !b.empty())
    throw DimensionMismatch("basis length does not match weight dimension");
  b.orthonormal_under_ = w;
  return b;
}

Basis Basis::orthonormal(Matrix vectors, const WeightMatrix& w) {
  Basis b(std::move(vectors));
  if (b.empty()) return mark_orthonormal(std::move(b), w);
  if (b.length() != w.dim()) throw DimensionMismatch("basis length does not match weight dimension");
  const Matrix bt = w.whiten(b.vectors_);
  const double defect =
      (bt.transpose() * bt - Matrix::Identity(b.size(), b.size())).cwiseAbs().maxCoeff();
  if (defect > 1e-8)
    throw Error("basis is not W-orthonormal (max defect " + std::to_string(defect) + ")");
  return mark_orthonormal(std::move(b), w);
}

Basis Basis::leading(Index k) const {
  if (k < 0 || k > size()) throw DimensionMismatch("leading: k out of range");
  Basis out(Matrix(vectors_.leftCols(k)));
  out.orthonormal_under_ = orthonormal_under_;
  return out;
}

Basis Basis::trailing(Index k) const {
  if (k < 0 || k > size()) throw DimensionMismatch("trailing: k out of range");
  Basis out(Matrix(vectors_.rightCols(size() - k)));
  out.orthonormal_under_ = orthonormal_under_;
  return out;
}

Basis Basis::concat(const Basis& other) const {
  if (empty()) return other;
  if (other.empty()) return *this;
  if (other.length() != length()) throw DimensionMismatch("concat: basis lengths differ");
  Matrix m(length(), size() + other.size());
  m << vectors_, other.vectors_;
  Basis out(std::move(m));
  if (orthonormal_under_ && other.orthonormal_under_) {
    const WeightMatrix& w = *orthonormal_under_;
    const double cross = (w.whiten(vectors_).transpose() * w.whiten(other.vectors_))
                             .cwiseAbs()
                             .maxCoeff();
    if (cross <= 1e-8) out.orthonormal_under_ = w;
  }
  return out;
}

namespace {

void check_length(const Basis& b, const WeightMatrix& w, Index n, const char* what) {
  if (b.length() != w.dim() || n != w.dim())
    throw DimensionMismatch(std::string(what) + ": basis length " + std::to_string(b.length()) +
                            ", weight dim " + std::to_string(w.dim()) + ", vector length " +
                            std::to_string(n));
}

struct WhitenedQr {
  Eigen::HouseholderQR<Matrix> qr;
  Index k;
};

WhitenedQr factor(const Basis& b, const WeightMatrix& w) {
  const Matrix bt = w.whiten(b.vectors());
  WhitenedQr out{Eigen::HouseholderQR<Matrix>(bt), b.size()};
  const auto r = out.qr.matrixQR().diagonal().cwiseAbs();
  const double lead = r.size() > 0 ? r.maxCoeff() : 0.0;
  for (Index i = 0; i < r.size(); ++i)
    if (!(r[i] > 1e-12 * lead))
      throw RankDeficient("basis is rank deficient under W (column " + std::to_string(i) + ")");
  if (b.size() > b.length()) throw RankDeficient("basis has more vectors than its length");
  return out;
}

// Q^T x for the Householder factor, full length.
Matrix apply_qt(const WhitenedQr& f, const Matrix& x) {
  return f.qr.householderQ().adjoint() * x;
}

}  // namespace

double w_norm(const Vector& v, const WeightMatrix& w) { return w.quadratic(v); }

double w_inner(const Vector& a, const Vector& b, const WeightMatrix& w) {
  return w.whiten(a).dot(w.whiten(b));
}

Matrix w_project(const Basis& b, const WeightMatrix& w, const Matrix& v) {
  check_length(b, w, v.rows(), "w_project");
  if (b.empty()) return Matrix(0, v.cols());
  const Matrix vt = w.whiten(v);
  if (b.is_orthonormal()) return w.whiten(b.vectors()).transpose() * vt;
  const WhitenedQr f = factor(b, w);
  const Matrix qtv = apply_qt(f, vt).topRows(f.k);
  return f.qr.matrixQR().topLeftCorner(f.k, f.k).triangularView<Eigen::Upper>().solve(qtv);
}

Vector w_project(const Basis& b, const WeightMatrix& w, const Vector& v) {
  return w_project(b, w, Matrix(v)).col(0);
}

Vector reconstruct(const Basis& b, const Vector& coefficients, const Vector& mean) {
  if (coefficients.size() != b.size() || mean.size() != b.length())
    throw DimensionMismatch("reconstruct: inconsistent sizes");
  return mean + b.vectors() * coefficients;
}

double reconstruction_error(const Basis& b, const WeightMatrix& w, const Vector& v) {
  check_length(b, w, v.size(), "reconstruction_error");
  const Vector vt = w.whiten(v);
  if (b.empty()) return vt.squaredNorm();
  if (b.is_orthonormal()) {
    const Matrix bt = w.whiten(b.vectors());
    return (vt - bt * (bt.transpose() * vt)).squaredNorm();
  }
  const WhitenedQr f = factor(b, w);
  const Vector qtv = apply_qt(f, vt).col(0);
  return qtv.tail(qtv.size() - f.k).squaredNorm();
}

namespace {

double total_variance(const Matrix& ft) {
  const double total = ft.squaredNorm();
  if (!(total > 0.0)) throw DegenerateEnsemble("ensemble has no weighted variance");
  return total;
}

}  // namespace

double variance_explained_single(const Vector& b, const WeightMatrix& w, const Matrix& centred) {
  if (b.size() != w.dim() || centred.rows() != w.dim())
    throw DimensionMismatch("variance_explained_single: inconsistent sizes");
  const Matrix ft = w.whiten(centred);
  const Vector bt = w.whiten(b);
  const double bb = bt.squaredNorm();
  if (!(bb > 0.0)) throw RankDeficient("zero basis vector");
  return (bt.transpose() * ft).squaredNorm() / bb / total_variance(ft);
}

double variance_explained(const Basis& b, const WeightMatrix& w, const Matrix& centred) {
  check_length(b, w, centred.rows(), "variance_explained");
  const Matrix ft = w.whiten(centred);
  const double total = total_variance(ft);
  if (b.empty()) return 0.0;
  if (b.is_orthonormal()) return (w.whiten(b.vectors()).transpose() * ft).squaredNorm() / total;
  const WhitenedQr f = factor(b, w);
  return apply_qt(f, ft).topRows(f.k).squaredNorm() / total;
}

namespace {

// Flips each vector so its largest-magnitude entry is positive.
void apply_sign_convention(Matrix& basis, Matrix& left, Matrix* whitened) {
  for (Index k = 0; k < basis.cols(); ++k) {
    Index imax = 0;
    basis.col(k).cwiseAbs().maxCoeff(&imax);
    if (basis(imax, k) < 0.0) {
      basis.col(k) *= -1.0;
      left.col(k) *= -1.0;
      if (whitened) whitened->col(k) *= -1.0;
    }
  }
}

WsvdResult svd_of_whitened(const Matrix& at, const WeightMatrix& w, double reference,
                           const Matrix* exclude, Index runs) {
  WsvdResult out;
  const Index l = at.rows();
  if (reference <= 0.0 || at.cols() == 0) {
    out.basis = mark_orthonormal(Basis(Matrix(l, 0)), w);
    out.left = Matrix(at.cols(), 0);
    out.diagnostic = "degenerate ensemble: no variation across runs";
    return out;
  }
  Eigen::BDCSVD<Matrix> svd(at, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  Index r = 0;
  while (r < s.size() && s[r] > kSingularDropTolerance * reference) ++r;
  out.singular_values = s.head(r);
  out.dropped_singular_values = s.tail(s.size() - r);
  Matrix p = svd.matrixU().leftCols(r);
  Matrix left = svd.matrixV().leftCols(r);
  if (exclude && exclude->cols() > 0) {
    // Remove round-off leakage into the excluded directions, then re-orthonormalise.
    for (int pass = 0; pass < 2; ++pass) p -= *exclude * (exclude->transpose() * p);
    for (Index k = 0; k < r; ++k) {
      for (Index j = 0; j < k; ++j) p.col(k) -= p.col(j).dot(p.col(k)) * p.col(j);
      p.col(k).normalize();
    }
  }
  Matrix b = w.unwhiten(p);
  apply_sign_convention(b, left, nullptr);
  out.basis = mark_orthonormal(Basis(std::move(b)), w);
  out.left = std::move(left);
  const double denom = runs > 1 ? static_cast<double>(runs - 1) : 1.0;
  out.coefficient_variances = out.singular_values.array().square() / denom;
  if (r == 0) out.diagnostic = "no singular values above the drop tolerance";
  return out;
}

double largest_singular_value(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  const Matrix g = a.cols() <= a.rows() ? Matrix(a.transpose() * a) : Matrix(a * a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

}  // namespace

WsvdResult wsvd(const Matrix& centred, const WeightMatrix& w) {
  if (centred.rows() != w.dim())
    throw DimensionMismatch("wsvd: ensemble length " + std::to_string(centred.rows()) +
                            " does not match weight dim " + std::to_string(w.dim()));
  const Matrix at = w.whiten(centred);
  const double ref = at.cwiseAbs().maxCoeff() > 0.0 ? largest_singular_value(at) : 0.0;
  return svd_of_whitened(at, w, ref, nullptr, centred.cols());
}

WsvdResult residual_basis(const Matrix& centred, const Basis& fixed, const WeightMatrix& w) {
  if (fixed.empty()) return wsvd(centred, w);
  check_length(fixed, w, centred.rows(), "residual_basis");
  const Matrix ft = w.whiten(centred);
  const double ref = ft.cwiseAbs().maxCoeff() > 0.0 ? largest_singular_value(ft) : 0.0;
  Matrix q;
  if (fixed.is_orthonormal()) {
    q = w.whiten(fixed.vectors());
  } else {
    const WhitenedQr f = factor(fixed, w);
    q = f.qr.householderQ() * Matrix::Identity(fixed.length(), fixed.size());
  }
  Matrix resid = ft;
  for (int pass = 0; pass < 2; ++pass) resid -= q * (q.transpose() * resid);
  return svd_of_whitened(resid, w, ref, &q, centred.cols());
}

GramSchmidtResult gram_schmidt_w(const Basis& b, const WeightMatrix& w, DependentPolicy policy,
                                 double tolerance) {
  if (b.length() != w.dim() && !b.empty())
    throw DimensionMismatch("gram_schmidt_w: basis length does not match weight dim");
  const Matrix bt = w.whiten(b.vectors());
  Matrix q(bt.rows(), bt.cols());
  GramSchmidtResult out;
  Index kept = 0;
  for (Index k = 0; k < bt.cols(); ++k) {
    Vector v = bt.col(k);
    const double original = v.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (Index j = 0; j < kept; ++j) v -= q.col(j).dot(v) * q.col(j);
    const double nv = v.norm();
    if (!(original > 0.0) || !(nv > tolerance * original)) {
      if (policy == DependentPolicy::error)
        throw RankDeficient("gram_schmidt_w: column " + std::to_string(k) +
                            " is linearly dependent on earlier columns");
      continue;
    }
    q.col(kept++) = v / nv;
    out.kept.push_back(k);
  }
  out.basis = mark_orthonormal(Basis(w.unwhiten(Matrix(q.leftCols(kept)))), w);
  return out;
}

Index truncation_for_variance(const Basis& b, const WeightMatrix& w, const Matrix& centred,
                              double target) {
  const auto rows = varmse_table(b, w, Vector::Zero(w.dim()), centred, 0.0);
  for (const auto& row : rows)
    if (row.variance_explained >= target - 1e-12) return row.k;
  return b.size();
}

std::vector<VarMseRow> varmse_table(const Basis& b, const WeightMatrix& w, const Vector& z_anomaly,
                                    const Matrix& centred, double threshold) {
  check_length(b, w, centred.rows(), "varmse_table");
  if (z_anomaly.size() != w.dim()) throw DimensionMismatch("varmse_table: z length mismatch");
  const Matrix ft = w.whiten(centred);
  const double total = total_variance(ft);
  const Vector zt = w.whiten(z_anomaly);
  Vector zc;  // per-direction squared coefficient of z
  Vector fc;  // per-direction captured ensemble variance
  double z_tail = 0.0;
  if (b.is_orthonormal()) {
    const Matrix bt = w.whiten(b.vectors());
    zc = (bt.transpose() * zt).array().square();
    fc = (bt.transpose() * ft).rowwise().squaredNorm();
    z_tail = (zt - bt * (bt.transpose() * zt)).squaredNorm();
  } else if (!b.empty()) {
    const WhitenedQr f = factor(b, w);
    const Vector qz = apply_qt(f, Matrix(zt)).col(0);
    const Matrix qf = apply_qt(f, ft).topRows(f.k);
    zc = qz.head(f.k).array().square();
    fc = qf.rowwise().squaredNorm();
    z_tail = qz.tail(qz.size() - f.k).squaredNorm();
  }
  std::vector<VarMseRow> rows;
  rows.reserve(b.size());
  double vcum = 0.0;
  // Reconstruction error of B_k is the tail beyond k plus what no vector captures.
  Vector rtail(b.size() + 1);
  rtail[b.size()] = z_tail;
  for (Index k = b.size(); k-- > 0;) rtail[k] = rtail[k + 1] + zc[k];
  for (Index k = 0; k < b.size(); ++k) {
    vcum += fc[k];
    rows.push_back({k + 1, vcum / total, rtail[k + 1], threshold});
  }
  return rows;
}

}  // namespace calibasis
