#include "calibasis/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "calibasis/error.hpp"
#include "calibasis/kernels.hpp"

namespace calibasis {

Index RegressorSpec::count(Index inputs) const {
  switch (kind) {
    case Kind::constant: return 1;
    case Kind::linear: return 1 + inputs;
    case Kind::monomials: return static_cast<Index>(powers.size());
  }
  return 0;
}

Vector RegressorSpec::evaluate(const Vector& x) const {
  const Index p = x.size();
  Vector g(count(p));
  switch (kind) {
    case Kind::constant:
      g[0] = 1.0;
      break;
    case Kind::linear:
      g[0] = 1.0;
      g.tail(p) = x;
      break;
    case Kind::monomials:
      for (std::size_t t = 0; t < powers.size(); ++t) {
        if (static_cast<Index>(powers[t].size()) != p)
          throw DimensionMismatch("monomial exponent vector length does not match input count");
        double v = 1.0;
        for (Index d = 0; d < p; ++d)
          for (int e = 0; e < powers[t][static_cast<std::size_t>(d)]; ++e) v *= x[d];
        g[static_cast<Index>(t)] = v;
      }
      break;
  }
  return g;
}

Matrix RegressorSpec::evaluate_rows(const Matrix& x) const {
  Matrix h(x.rows(), count(x.cols()));
  for (Index i = 0; i < x.rows(); ++i) h.row(i) = evaluate(x.row(i).transpose()).transpose();
  return h;
}

void GpSpec::validate(Index inputs) const {
  if (!(nugget >= 0.0) || !std::isfinite(nugget)) throw InvalidConfig("GP nugget must be >= 0");
  if (mode == FitMode::fixed) {
    if (lengthscales.size() != 1 && static_cast<Index>(lengthscales.size()) != inputs)
      throw InvalidConfig("fixed GP needs one lengthscale or one per input");
  }
  for (double l : lengthscales)
    if (!(l > 0.0) || !std::isfinite(l)) throw InvalidConfig("GP lengthscales must be > 0");
  if (!(min_lengthscale > 0.0 && max_lengthscale > min_lengthscale))
    throw InvalidConfig("GP lengthscale bounds must satisfy 0 < min < max");
  if (regressors.kind == RegressorSpec::Kind::monomials && regressors.powers.empty())
    throw InvalidConfig("monomial regressors need at least one term");
  for (const auto& term : regressors.powers)
    for (int e : term)
      if (e < 0) throw InvalidConfig("monomial exponents must be nonnegative");
}

namespace {

Matrix correlation(const Matrix& x, const Vector& inv_phi2) {
  const Index n = x.rows();
  Matrix r(n, n);
  for (Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Index j = 0; j < i; ++j) {
      double s = 0.0;
      for (Index d = 0; d < x.cols(); ++d) {
        const double diff = x(i, d) - x(j, d);
        s += inv_phi2[d] * diff * diff;
      }
      r(i, j) = r(j, i) = std::exp(-s);
    }
  }
  return r;
}

struct Profile {
  Eigen::LLT<Matrix> llt;
  Matrix r;
  Matrix h_white;
  Vector beta;
  Vector e_white;
  double sigma2 = 0.0;
  double loglik = -std::numeric_limits<double>::infinity();
  bool ok = false;
};

Profile profile(const Matrix& x, const Vector& y, const Matrix& h, double nugget,
                const Vector& phi) {
  Profile p;
  const Vector inv_phi2 = phi.array().square().inverse();
  p.r = correlation(x, inv_phi2);
  Matrix a = p.r;
  a.diagonal().array() += nugget;
  p.llt.compute(a);
  if (p.llt.info() != Eigen::Success) return p;
  const auto l = p.llt.matrixL();
  const Vector ld = p.llt.matrixLLT().diagonal();
  if (!(ld.minCoeff() > 0.0)) return p;
  p.h_white = l.solve(h);
  const Vector y_white = l.solve(y);
  Eigen::ColPivHouseholderQR<Matrix> qr(p.h_white);
  if (qr.rank() < h.cols()) return p;
  p.beta = qr.solve(y_white);
  p.e_white = y_white - p.h_white * p.beta;
  const double n = static_cast<double>(x.rows());
  p.sigma2 = p.e_white.squaredNorm() / n;
  p.ok = true;
  if (p.sigma2 > 0.0 && std::isfinite(p.sigma2))
    p.loglik = -0.5 * n * std::log(p.sigma2) - ld.array().log().sum();
  return p;
}

}  // namespace

double concentrated_log_likelihood(const Matrix& x, const Vector& y, const RegressorSpec& reg,
                                   double nugget, const Vector& log_lengthscales,
                                   Vector* gradient) {
  if (x.rows() != y.size() || log_lengthscales.size() != x.cols())
    throw DimensionMismatch("concentrated_log_likelihood: inconsistent sizes");
  const Vector phi = log_lengthscales.array().exp();
  const Profile p = profile(x, y, reg.evaluate_rows(x), nugget, phi);
  if (gradient) gradient->setZero(x.cols());
  if (!std::isfinite(p.loglik)) return p.loglik;
  if (gradient) {
    const Vector alpha = p.llt.matrixU().solve(p.e_white);
    const Matrix ainv = p.llt.solve(Matrix::Identity(x.rows(), x.rows()));
    const Index n = x.rows();
    for (Index d = 0; d < x.cols(); ++d) {
      const double s = 2.0 / (phi[d] * phi[d]);
      double quad = 0.0;
      double trace = 0.0;
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < i; ++j) {
          const double diff = x(i, d) - x(j, d);
          const double rd = p.r(i, j) * s * diff * diff;
          quad += 2.0 * alpha[i] * alpha[j] * rd;
          trace += 2.0 * ainv(i, j) * rd;
        }
      }
      (*gradient)[d] = 0.5 * quad / p.sigma2 - 0.5 * trace;
    }
  }
  return p.loglik;
}

Vector median_distance_lengthscales(const Matrix& x) {
  Vector out = Vector::Ones(x.cols());
  const Index n = x.rows();
  if (n < 2) return out;
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index k = 0; k < x.cols(); ++k) {
    d.clear();
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < i; ++j) d.push_back(std::abs(x(i, k) - x(j, k)));
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    if (*mid > 0.0) out[k] = *mid;
  }
  return out;
}

namespace {

struct MlResult {
  Vector log_phi;
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
};

// BFGS on eta, where log phi = lo + (hi - lo) * sigmoid(eta) keeps phi inside the box.
MlResult maximise_likelihood(const Matrix& x, const Vector& y, const GpSpec& spec,
                             const Vector& start_log_phi) {
  const Index p = x.cols();
  const double lo = std::log(spec.min_lengthscale);
  const double hi = std::log(spec.max_lengthscale);
  const auto to_psi = [&](const Vector& eta) {
    return Vector((lo + (hi - lo) / (1.0 + (-eta.array()).exp())).matrix());
  };
  const auto eval = [&](const Vector& eta, Vector& grad_eta) {
    const Vector psi = to_psi(eta);
    Vector g;
    const double ll = concentrated_log_likelihood(x, y, spec.regressors, spec.nugget, psi, &g);
    const Vector sig = ((psi.array() - lo) / (hi - lo)).matrix();
    grad_eta = -(g.array() * (hi - lo) * sig.array() * (1.0 - sig.array())).matrix();
    return -ll;
  };

  Vector eta(p);
  for (Index d = 0; d < p; ++d) {
    const double t = std::clamp((start_log_phi[d] - lo) / (hi - lo), 1e-3, 1.0 - 1e-3);
    eta[d] = std::log(t / (1.0 - t));
  }
  Vector grad;
  double f = eval(eta, grad);
  MlResult out;
  if (!std::isfinite(f)) return out;
  Matrix hinv = Matrix::Identity(p, p);
  for (int it = 0; it < spec.max_iterations; ++it) {
    if (grad.cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, std::abs(f))) {
      out.converged = true;
      break;
    }
    Vector dir = -hinv * grad;
    if (dir.dot(grad) >= 0.0) {
      hinv.setIdentity();
      dir = -grad;
    }
    // Long first steps tend to land on the flat small-lengthscale plateau.
    double step = std::min(1.0, 1.0 / dir.cwiseAbs().maxCoeff());
    Vector eta_new, grad_new;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      eta_new = eta + step * dir;
      f_new = eval(eta_new, grad_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * dir.dot(grad)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent possible along the quasi-Newton or gradient direction: numerically stationary.
      out.converged = grad.cwiseAbs().maxCoeff() < 1e-3 * std::max(1.0, std::abs(f));
      break;
    }
    const Vector s = eta_new - eta;
    const Vector yv = grad_new - grad;
    const double sy = s.dot(yv);
    const double improvement = f - f_new;
    eta = eta_new;
    grad = grad_new;
    f = f_new;
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Matrix i = Matrix::Identity(p, p);
      hinv = (i - rho * s * yv.transpose()) * hinv * (i - rho * yv * s.transpose()) +
             rho * s * s.transpose();
    }
    if (improvement < 1e-12 * std::max(1.0, std::abs(f))) {
      out.converged = true;
      break;
    }
  }
  out.log_phi = to_psi(eta);
  out.loglik = -f;
  return out;
}

}  // namespace

CoefficientEmulator CoefficientEmulator::fit(const Matrix& x, const Vector& y,
                                             const GpSpec& spec) {
  spec.validate(x.cols());
  if (x.rows() != y.size()) throw DimensionMismatch("GP fit: design rows and targets differ");
  if (x.rows() == 0) throw DimensionMismatch("GP fit: no training points");
  if (!x.allFinite() || !y.allFinite()) throw DomainError("GP fit: non-finite training data");
  const Index h = spec.regressors.count(x.cols());
  if (x.rows() < h) throw RankDeficient("GP fit: fewer training points than regressors");

  CoefficientEmulator em;
  em.spec_ = spec;
  em.x_ = x;
  em.y_ = y;
  const Index p = x.cols();
  if (spec.mode == FitMode::fixed) {
    em.phi_ = spec.lengthscales.size() == 1
                  ? Vector::Constant(p, spec.lengthscales[0])
                  : Eigen::Map<const Vector>(spec.lengthscales.data(), p).eval();
  } else {
    if (x.rows() <= h + 1)
      throw RankDeficient("GP fit: maximum likelihood needs more than dim(g) + 1 runs");
    const Vector median =
        median_distance_lengthscales(x).cwiseMax(spec.min_lengthscale).cwiseMin(spec.max_lengthscale);
    std::vector<Vector> starts = {median.array().log().matrix(),
                                  Vector::Constant(p, std::log(0.5)),
                                  Vector::Constant(p, std::log(2.0))};
    // Coarse scan over a common multiple of the median distances.
    Vector scan_best = starts[0];
    double scan_ll = -std::numeric_limits<double>::infinity();
    for (int k = -4; k <= 3; ++k) {
      const Vector s = (starts[0].array() + k * std::log(2.0))
                           .cwiseMax(std::log(spec.min_lengthscale))
                           .cwiseMin(std::log(spec.max_lengthscale));
      const double ll = concentrated_log_likelihood(x, y, spec.regressors, spec.nugget, s);
      if (ll > scan_ll) {
        scan_ll = ll;
        scan_best = s;
      }
    }
    starts.push_back(scan_best);
    MlResult best;
    for (const Vector& s : starts) {
      MlResult r = maximise_likelihood(x, y, spec, s);
      if (r.converged && r.loglik > best.loglik) best = std::move(r);
    }
    if (best.converged && std::isfinite(best.loglik)) {
      em.phi_ = best.log_phi.array().exp();
    } else {
      em.phi_ = median;
      em.warning_ = "maximum-likelihood fit did not converge; using median-distance lengthscales";
    }
  }
  em.factorise();
  return em;
}

CoefficientEmulator CoefficientEmulator::with_lengthscales(const Matrix& x, const Vector& y,
                                                           const GpSpec& spec,
                                                           const Vector& lengthscales,
                                                           std::string warning) {
  spec.validate(x.cols());
  if (x.rows() != y.size() || lengthscales.size() != x.cols())
    throw DimensionMismatch("GP rebuild: inconsistent sizes");
  for (Index d = 0; d < lengthscales.size(); ++d)
    if (!(lengthscales[d] > 0.0)) throw InvalidConfig("GP lengthscales must be > 0");
  CoefficientEmulator em;
  em.spec_ = spec;
  em.x_ = x;
  em.y_ = y;
  em.phi_ = lengthscales;
  em.warning_ = std::move(warning);
  em.factorise();
  return em;
}

void CoefficientEmulator::factorise() {
  const Index n = x_.rows();
  inv_phi2_ = phi_.array().square().inverse();
  const Matrix h = spec_.regressors.evaluate_rows(x_);
  Profile p = profile(x_, y_, h, spec_.nugget, phi_);
  if (p.llt.info() != Eigen::Success || p.beta.size() == 0)
    throw IllConditioned("GP correlation matrix is singular; increase the nugget");
  Matrix a = p.r;
  a.diagonal().array() += spec_.nugget;
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  const double emin = es.eigenvalues()[0];
  cond_ = emin > 0.0 ? es.eigenvalues()[n - 1] / emin : std::numeric_limits<double>::infinity();
  if (cond_ > 1e12)
    throw IllConditioned("GP correlation matrix condition number " + std::to_string(cond_) +
                         " exceeds 1e12; increase the nugget");
  lower_ = p.llt.matrixL();
  beta_ = p.beta;
  sigma2_ = p.sigma2;
  loglik_ = p.loglik;
  alpha_ = p.llt.matrixU().solve(p.e_white);
  h_white_ = p.h_white;
  hh_.compute(h_white_.transpose() * h_white_);
}

GpPrediction CoefficientEmulator::predict(const Vector& x) const {
  if (!fitted()) throw Error("GP used before fitting");
  if (x.size() != x_.cols()) throw DimensionMismatch("GP predict: input dimension mismatch");
  const std::size_t n = static_cast<std::size_t>(x_.rows());
  Vector k(x_.rows());
  std::span<double> ks(k.data(), n);
  kernels::weighted_sqdist({x.data(), static_cast<std::size_t>(x.size())}, x_.data(), n, n,
                           {inv_phi2_.data(), static_cast<std::size_t>(inv_phi2_.size())}, ks);
  kernels::exp_neg(ks);
  const Vector g = spec_.regressors.evaluate(x);
  const double mean = g.dot(beta_) + kernels::dot(ks, {alpha_.data(), n});
  Vector v(x_.rows());
  kernels::forward_substitution(lower_.data(), n, ks, {v.data(), n});
  const Vector u = g - h_white_.transpose() * v;
  double var = sigma2_ * (1.0 - v.squaredNorm() + u.dot(hh_.solve(u)));
  if (var < 0.0) {
    if (var < -1e-10 * std::max(sigma2_, 1e-300))
      throw Error("GP predictive variance is negative beyond tolerance");
    var = 0.0;
  }
  return {mean, var};
}

std::vector<LooEntry> CoefficientEmulator::loo() const {
  if (!fitted()) throw Error("GP used before fitting");
  const Index n = x_.rows();
  Matrix ainv = Matrix::Identity(n, n);
  const auto l = lower_.triangularView<Eigen::Lower>();
  l.solveInPlace(ainv);
  l.transpose().solveInPlace(ainv);
  std::vector<LooEntry> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const double d = ainv(i, i);
    const double resid = alpha_[i] / d;
    const double var = sigma2_ / d;
    out.push_back({resid, var, var > 0.0 ? resid / std::sqrt(var) : 0.0});
  }
  return out;
}

}  // namespace calibasis
