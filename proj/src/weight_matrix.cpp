#include "calibasis/weight_matrix.hpp"

#include <cmath>
#include <string>

#include "calibasis/error.hpp"

namespace calibasis {

struct WeightMatrix::Impl {
  Form form = Form::diagonal;
  Vector diag;     // diagonal form: the variances
  Vector sqrt_diag;
  Matrix dense;    // dense form: W
  Matrix lower;    // dense form: L; diagonal form: diag(sqrt)
  double jitter = 0.0;
};

namespace {

void check_symmetric(const Matrix& w) {
  if (w.rows() != w.cols())
    throw DimensionMismatch("weight matrix must be square, got " + std::to_string(w.rows()) +
                            "x" + std::to_string(w.cols()));
  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  const double asym = (w - w.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= 1e-12 * scale))
    throw NotSymmetric("weight matrix is not symmetric (max |W - W^T| = " +
                       std::to_string(asym) + ")");
}

bool try_factor(const Matrix& w, Matrix& lower) {
  Eigen::LLT<Matrix> llt(w);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  for (Index i = 0; i < lower.rows(); ++i)
    if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i))) return false;
  return true;
}

}  // namespace

const WeightMatrix::Impl& WeightMatrix::impl() const {
  if (!impl_) throw Error("WeightMatrix used before initialisation");
  return *impl_;
}

WeightMatrix WeightMatrix::identity(Index n) { return diagonal(Vector::Ones(n)); }

WeightMatrix WeightMatrix::diagonal(const Vector& variances) {
  if (variances.size() == 0) throw DimensionMismatch("weight matrix must be non-empty");
  for (Index i = 0; i < variances.size(); ++i)
    if (!(variances[i] > 0.0) || !std::isfinite(variances[i]))
      throw NotPositiveDefinite("diagonal weight entry " + std::to_string(i) +
                                " is not positive");
  auto impl = std::make_shared<Impl>();
  impl->form = Form::diagonal;
  impl->diag = variances;
  impl->sqrt_diag = variances.cwiseSqrt();
  impl->lower = impl->sqrt_diag.asDiagonal();
  return WeightMatrix(std::move(impl));
}

WeightMatrix WeightMatrix::dense(const Matrix& w) {
  if (w.size() == 0) throw DimensionMismatch("weight matrix must be non-empty");
  check_symmetric(w);
  auto impl = std::make_shared<Impl>();
  impl->form = Form::dense;
  impl->dense = 0.5 * (w + w.transpose());
  if (!try_factor(impl->dense, impl->lower))
    throw NotPositiveDefinite("weight matrix is not positive definite");
  impl->diag = impl->dense.diagonal();
  return WeightMatrix(std::move(impl));
}

WeightMatrix WeightMatrix::dense_with_jitter(const Matrix& w, double max_jitter) {
  if (w.size() == 0) throw DimensionMismatch("weight matrix must be non-empty");
  check_symmetric(w);
  Matrix sym = 0.5 * (w + w.transpose());
  const double mean_diag = sym.diagonal().mean();
  auto impl = std::make_shared<Impl>();
  impl->form = Form::dense;
  double jitter = 0.0;
  for (;;) {
    Matrix trial = sym;
    trial.diagonal().array() += jitter * mean_diag;
    if (try_factor(trial, impl->lower)) {
      impl->dense = std::move(trial);
      break;
    }
    jitter = jitter == 0.0 ? 1e-14 : jitter * 10.0;
    if (jitter > max_jitter * (1.0 + 1e-9))
      throw NotPositiveDefinite("weight matrix is not positive definite within jitter " +
                                std::to_string(max_jitter));
  }
  impl->jitter = jitter;
  impl->diag = impl->dense.diagonal();
  return WeightMatrix(std::move(impl));
}

Index WeightMatrix::dim() const { return impl().diag.size(); }
WeightMatrix::Form WeightMatrix::form() const { return impl().form; }
double WeightMatrix::jitter() const { return impl().jitter; }
Vector WeightMatrix::diagonal_entries() const { return impl().diag; }
const Matrix& WeightMatrix::cholesky_lower() const { return impl().lower; }

Matrix WeightMatrix::to_dense() const {
  const Impl& m = impl();
  if (m.form == Form::dense) return m.dense;
  return m.diag.asDiagonal();
}

static void check_rows(Index expected, Index got, const char* what) {
  if (expected != got)
    throw DimensionMismatch(std::string(what) + ": expected length " +
                            std::to_string(expected) + ", got " + std::to_string(got));
}

Vector WeightMatrix::whiten(const Vector& x) const {
  const Impl& m = impl();
  check_rows(dim(), x.size(), "whiten");
  if (m.form == Form::diagonal) return x.cwiseQuotient(m.sqrt_diag);
  return m.lower.triangularView<Eigen::Lower>().solve(x);
}

Matrix WeightMatrix::whiten(const Matrix& x) const {
  const Impl& m = impl();
  check_rows(dim(), x.rows(), "whiten");
  if (m.form == Form::diagonal) return m.sqrt_diag.cwiseInverse().asDiagonal() * x;
  return m.lower.triangularView<Eigen::Lower>().solve(x);
}

Matrix WeightMatrix::unwhiten(const Matrix& x) const {
  const Impl& m = impl();
  check_rows(dim(), x.rows(), "unwhiten");
  if (m.form == Form::diagonal) return m.sqrt_diag.asDiagonal() * x;
  return m.lower.triangularView<Eigen::Lower>() * x;
}

Vector WeightMatrix::unwhiten(const Vector& x) const {
  return unwhiten(Matrix(x)).col(0);
}

Vector WeightMatrix::solve(const Vector& x) const {
  const Impl& m = impl();
  check_rows(dim(), x.size(), "solve");
  if (m.form == Form::diagonal) return x.cwiseQuotient(m.diag);
  Vector y = m.lower.triangularView<Eigen::Lower>().solve(x);
  return m.lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix WeightMatrix::solve(const Matrix& x) const {
  const Impl& m = impl();
  check_rows(dim(), x.rows(), "solve");
  if (m.form == Form::diagonal) return m.diag.cwiseInverse().asDiagonal() * x;
  Matrix y = m.lower.triangularView<Eigen::Lower>().solve(x);
  return m.lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

double WeightMatrix::quadratic(const Vector& x) const { return whiten(x).squaredNorm(); }

double WeightMatrix::log_determinant() const {
  const Impl& m = impl();
  if (m.form == Form::diagonal) return m.diag.array().log().sum();
  return 2.0 * m.lower.diagonal().array().log().sum();
}

double WeightMatrix::condition_estimate() const {
  const Impl& m = impl();
  if (m.form == Form::diagonal) return m.diag.maxCoeff() / m.diag.minCoeff();
  const Vector d = m.lower.diagonal();
  const double r = d.maxCoeff() / d.minCoeff();
  return r * r;
}

WeightMatrix WeightMatrix::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor))
    throw DomainError("weight scale factor must be positive and finite");
  const Impl& m = impl();
  auto out = std::make_shared<Impl>(m);
  out->diag *= factor;
  out->lower *= std::sqrt(factor);
  if (m.form == Form::diagonal)
    out->sqrt_diag *= std::sqrt(factor);
  else
    out->dense *= factor;
  return WeightMatrix(std::move(out));
}

WeightMatrix WeightMatrix::plus(const WeightMatrix& other) const {
  check_rows(dim(), other.dim(), "plus");
  if (is_diagonal() && other.is_diagonal())
    return diagonal(impl().diag + other.impl().diag);
  return dense(to_dense() + other.to_dense());
}

}  // namespace calibasis
