#include "support/oracles.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace oracle {

Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

Matrix random_spd(Index n, std::mt19937_64& rng, double shift) {
  const Matrix a = random_matrix(n, n, rng);
  Matrix s = a * a.transpose() / static_cast<double>(n);
  s.diagonal().array() += shift;
  return 0.5 * (s + s.transpose());
}

Matrix random_orthogonal(Index n, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(n, n, rng));
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index i = 0; i < n; ++i)
    if (r(i, i) < 0) q.col(i) *= -1.0;
  return q;
}

double w_norm2(const Vector& v, const Matrix& w) {
  const Matrix winv = w.fullPivLu().inverse();
  return v.dot(winv * v);
}

Vector w_project(const Matrix& b, const Matrix& w, const Vector& v) {
  const Matrix winv = w.fullPivLu().inverse();
  const Matrix g = b.transpose() * winv * b;
  return g.fullPivLu().solve(b.transpose() * winv * v);
}

double recon_error(const Matrix& b, const Matrix& w, const Vector& v) {
  return w_norm2(v - b * w_project(b, w, v), w);
}

namespace {

double gamma_series(double a, double x) {
  double sum = 1.0 / a;
  double term = sum;
  for (int k = 1; k < 10000; ++k) {
    term *= x / (a + k);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * sum;
}

// Lentz continued fraction for Q(a, x).
double gamma_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  return x < a + 1.0 ? gamma_series(a, x) : 1.0 - gamma_cf(a, x);
}

double chi2_quantile(double dof, double level) {
  double lo = 0.0;
  double hi = dof + 20.0 * std::sqrt(2.0 * dof) + 50.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gamma_p(0.5 * dof, 0.5 * mid) < level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

GpOracle gp_predict(const Matrix& x, const Vector& y, const Matrix& h, const Vector& phi,
                    double nugget, const Vector& x_new, const Vector& h_new) {
  const Index n = x.rows();
  const auto corr = [&](const Vector& a, const Vector& b) {
    double s = 0.0;
    for (Index d = 0; d < a.size(); ++d) s += std::pow((a[d] - b[d]) / phi[d], 2);
    return std::exp(-s);
  };
  Matrix a(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = corr(x.row(i), x.row(j)) + (i == j ? nugget : 0.0);
  Vector k(n);
  for (Index i = 0; i < n; ++i) k[i] = corr(x.row(i), x_new);
  const Matrix ainv = a.fullPivLu().inverse();
  const Matrix hah = h.transpose() * ainv * h;
  const Matrix hahinv = hah.fullPivLu().inverse();
  const Vector beta = hahinv * h.transpose() * ainv * y;
  const Vector e = y - h * beta;
  const double sigma2 = e.dot(ainv * e) / static_cast<double>(n);
  const Vector u = h_new - h.transpose() * ainv * k;
  return {h_new.dot(beta) + k.dot(ainv * e), sigma2 * (1.0 - k.dot(ainv * k) + u.dot(hahinv * u))};
}

double mahalanobis(const Vector& z, const Vector& m, const Matrix& s) {
  const Vector r = z - m;
  return r.dot(s.fullPivLu().solve(r));
}

}  // namespace oracle

namespace oracle {

HiddenSignal hidden_signal(Index l, Index n, std::mt19937_64& rng, bool identity_weight) {
  HiddenSignal h;
  h.w = identity_weight ? Matrix(Matrix::Identity(l, l)) : random_spd(l, rng, 1.0);
  const Index r = std::min<Index>(n - 1, 6);
  const Matrix dirs = random_orthogonal(l, rng).leftCols(r);
  Matrix f = Matrix::Zero(l, n);
  std::normal_distribution<double> nd(0.0, 1.0);
  const double scales[6] = {10.0, 4.0, 2.0, 1.0, 0.7, 0.5};
  for (Index j = 0; j < n; ++j)
    for (Index k = 0; k < r; ++k) f.col(j) += scales[k] * nd(rng) * dirs.col(k);
  const Vector mu = f.rowwise().mean();
  h.centred = f.colwise() - mu;
  h.z = 0.5 * dirs.col(0) + 6.0 * dirs.col(r - 1);
  return h;
}

}  // namespace oracle
