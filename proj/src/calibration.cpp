#include "calibasis/calibration.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "calibasis/error.hpp"
#include "calibasis/rng.hpp"

namespace calibasis {

double chi2_threshold(Index dof, double level) {
  if (dof < 1) throw DomainError("chi-squared degrees of freedom must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("chi-squared level must lie in (0, 1)");
  const boost::math::chi_squared_distribution<double> dist(static_cast<double>(dof));
  return boost::math::quantile(dist, level);
}

WeightMatrix UncertaintySpec::total() const { return sigma_e.plus(sigma_eta); }

void UncertaintySpec::validate() const {
  if (sigma_e.dim() != sigma_eta.dim())
    throw DimensionMismatch("observation and discrepancy covariances differ in dimension");
}

namespace {

std::shared_ptr<const FieldEmulator> borrow(const FieldEmulator& em) {
  return std::shared_ptr<const FieldEmulator>(&em, [](const FieldEmulator*) {});
}

}  // namespace

ImplausibilityEvaluator::ImplausibilityEvaluator(std::shared_ptr<const FieldEmulator> em,
                                                 const Vector& z, const UncertaintySpec& u,
                                                 ImplausibilityOptions opts)
    : em_(std::move(em)) {
  if (!em_) throw Error("implausibility: missing emulator");
  u.validate();
  length_ = em_->length();
  if (z.size() != length_ || u.dim() != length_)
    throw DimensionMismatch("implausibility: observation, uncertainty and emulator lengths differ");
  const WeightMatrix wt = u.total();

  // Discarded-basis inflation, restricted to strictly positive variances.
  std::vector<Index> keep;
  if (opts.include_discarded)
    for (Index k = 0; k < em_->discarded().size(); ++k)
      if (em_->discarded_variances()[k] > 0.0) keep.push_back(k);
  const Index d = static_cast<Index>(keep.size());
  Matrix dt(length_, d);
  Vector sd(d);
  for (Index k = 0; k < d; ++k) {
    dt.col(k) = em_->discarded().vectors().col(keep[static_cast<std::size_t>(k)]);
    sd[k] = em_->discarded_variances()[keep[static_cast<std::size_t>(k)]];
  }
  if (d > 0) dt = wt.whiten(dt);

  const Vector r0t = wt.whiten(Vector(z - em_->mean()));
  const Matrix gt = wt.whiten(em_->retained().vectors());
  s0_ = r0t.squaredNorm();
  b_ = gt.transpose() * r0t;
  h_ = gt.transpose() * gt;
  logdet_a_ = wt.log_determinant();
  if (d > 0) {
    Matrix m = dt.transpose() * dt;
    m.diagonal() += sd.cwiseInverse();
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("implausibility: discarded-variance correction is not PD");
    const Vector u0 = dt.transpose() * r0t;
    const Matrix dg = dt.transpose() * gt;
    const Vector mu0 = llt.solve(u0);
    const Matrix mdg = llt.solve(dg);
    s0_ -= u0.dot(mu0);
    b_ -= dg.transpose() * mu0;
    h_ -= dg.transpose() * mdg;
    logdet_a_ += sd.array().log().sum() + 2.0 * Vector(llt.matrixLLT().diagonal()).array().log().sum();
  }
  h_ = 0.5 * (h_ + h_.transpose());
}

ImplausibilityEvaluator::Terms ImplausibilityEvaluator::evaluate(const Vector& theta) const {
  const CoefficientMoments c = em_->predict_coefficients(theta);
  const Index q = c.mean.size();
  const Vector hm = h_ * c.mean;
  double quad = s0_ - 2.0 * c.mean.dot(b_) + c.mean.dot(hm);
  const Vector sq = c.variance.cwiseSqrt();
  const Vector w = sq.cwiseProduct(b_ - hm);
  Matrix k = sq.asDiagonal() * h_ * sq.asDiagonal();
  k.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("implausibility: total variance is not positive definite");
  quad -= w.dot(llt.solve(w));
  double logdet = 0.0;
  for (Index i = 0; i < q; ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
  return {std::max(0.0, quad), logdet};
}

double ImplausibilityEvaluator::operator()(const Vector& theta) const {
  return evaluate(theta).quad;
}

double ImplausibilityEvaluator::log_likelihood(const Vector& theta) const {
  const Terms t = evaluate(theta);
  return -0.5 * (t.quad + logdet_a_ + t.logdet_correction +
                 static_cast<double>(length_) * std::log(2.0 * std::numbers::pi));
}

double implausibility_field(const FieldEmulator& em, const Vector& theta, const Vector& z,
                            const UncertaintySpec& u, ImplausibilityOptions opts) {
  return ImplausibilityEvaluator(borrow(em), z, u, opts)(theta);
}

double implausibility_field_dense(const FieldEmulator& em, const Vector& theta, const Vector& z,
                                  const UncertaintySpec& u, ImplausibilityOptions opts) {
  u.validate();
  if (z.size() != em.length() || u.dim() != em.length())
    throw DimensionMismatch("implausibility: observation, uncertainty and emulator lengths differ");
  FieldPrediction p = em.predict_field(theta);
  if (!opts.include_discarded) {
    p.discarded.resize(em.length(), 0);
    p.discarded_var.resize(0);
  }
  Matrix total = p.dense_covariance() + u.sigma_e.to_dense() + u.sigma_eta.to_dense();
  Eigen::LLT<Matrix> llt(total);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("implausibility: total variance is not positive definite");
  const Vector r = z - p.mean;
  return r.dot(llt.solve(r));
}

double implausibility_coeff(const FieldEmulator& em, const Vector& theta, const Vector& z,
                            const UncertaintySpec& u, CoefficientProjection mode) {
  u.validate();
  if (z.size() != em.length() || u.dim() != em.length())
    throw DimensionMismatch("implausibility: observation, uncertainty and emulator lengths differ");
  const CoefficientMoments c = em.predict_coefficients(theta);
  const Matrix& g = em.retained().vectors();
  const Vector anomaly = z - em.mean();
  const Matrix sigma = u.sigma_e.to_dense() + u.sigma_eta.to_dense();
  Vector zq;
  Matrix cov;
  if (mode == CoefficientProjection::printed) {
    zq = g.transpose() * anomaly;
    cov = g.transpose() * sigma * g;
  } else {
    const Matrix p = em.weight().solve(g).transpose();  // Gamma^T W^{-1} for W-orthonormal Gamma
    zq = p * anomaly;
    cov = p * sigma * p.transpose();
  }
  cov.diagonal() += c.variance;
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("coefficient implausibility: covariance is not positive definite");
  const Vector r = zq - c.mean;
  return std::max(0.0, r.dot(llt.solve(r)));
}

NroyMembership::NroyMembership(std::shared_ptr<const ImplausibilityEvaluator> eval,
                               double threshold, std::shared_ptr<const NroyMembership> parent)
    : eval_(std::move(eval)), threshold_(threshold), parent_(std::move(parent)) {
  if (!eval_) throw Error("NROY membership needs an implausibility evaluator");
  if (std::isnan(threshold_)) throw DomainError("NROY threshold is NaN");
  if (parent_ && parent_->evaluator().inputs() != eval_->inputs())
    throw DimensionMismatch("parent wave has a different input dimension");
}

bool NroyMembership::in_parents(const Vector& theta) const {
  return !parent_ || parent_->contains(theta);
}

double NroyMembership::implausibility(const Vector& theta) const {
  if (!in_parents(theta)) return std::numeric_limits<double>::infinity();
  return (*eval_)(theta);
}

bool NroyMembership::contains(const Vector& theta) const {
  return implausibility(theta) <= threshold_;
}

Index NroyMembership::depth() const { return parent_ ? parent_->depth() + 1 : 1; }

WaveResult history_match(std::shared_ptr<const ImplausibilityEvaluator> eval, double threshold,
                         const SamplerConfig& sampler) {
  if (!eval) throw Error("history_match: missing evaluator");
  if (sampler.samples <= 0) throw DomainError("history_match: sample size must be positive");
  auto membership = std::make_shared<const NroyMembership>(eval, threshold, sampler.parent);
  WaveResult res;
  res.threshold = threshold;
  res.seed = sampler.seed;
  res.sample_count = sampler.samples;
  res.samples = uniform_samples(sampler.samples, eval->inputs(), sampler.seed);
  res.implausibility.resize(sampler.samples);
  res.accepted.assign(static_cast<std::size_t>(sampler.samples), 0);
  const NroyMembership& m = *membership;
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < sampler.samples; ++i) {
    const Vector theta = res.samples.row(i).transpose();
    const double imp = m.implausibility(theta);
    res.implausibility[i] = imp;
    res.accepted[static_cast<std::size_t>(i)] = imp <= threshold ? 1 : 0;
  }
  Index count = 0;
  for (char a : res.accepted) count += a;
  res.retained.resize(count, eval->inputs());
  res.retained_implausibility.resize(count);
  Index r = 0;
  for (Index i = 0; i < sampler.samples; ++i) {
    if (!res.accepted[static_cast<std::size_t>(i)]) continue;
    res.retained.row(r) = res.samples.row(i);
    res.retained_implausibility[r++] = res.implausibility[i];
  }
  const double n = static_cast<double>(sampler.samples);
  res.nroy_fraction = static_cast<double>(count) / n;
  res.standard_error = std::sqrt(res.nroy_fraction * (1.0 - res.nroy_fraction) / n);
  if (count == 0)
    res.diagnostic = "no samples accepted: NROY space may be empty (possible terminal case)";
  res.membership = std::move(membership);
  return res;
}

std::vector<PairCell> nroy_pair_grid(const WaveResult& wave, Index bins) {
  if (bins <= 0) throw DomainError("nroy_pair_grid: bins must be positive");
  const Index p = wave.samples.cols();
  const auto bin_of = [bins](double x) {
    const auto b = static_cast<Index>(std::floor((x + 1.0) * 0.5 * static_cast<double>(bins)));
    return std::clamp<Index>(b, 0, bins - 1);
  };
  std::vector<PairCell> out;
  for (Index i = 0; i < p; ++i) {
    for (Index j = i + 1; j < p; ++j) {
      std::vector<double> hit(static_cast<std::size_t>(bins * bins), 0.0);
      std::vector<double> tot(static_cast<std::size_t>(bins * bins), 0.0);
      for (Index s = 0; s < wave.samples.rows(); ++s) {
        const auto cell =
            static_cast<std::size_t>(bin_of(wave.samples(s, i)) * bins + bin_of(wave.samples(s, j)));
        tot[cell] += 1.0;
        if (wave.accepted[static_cast<std::size_t>(s)]) hit[cell] += 1.0;
      }
      for (Index bi = 0; bi < bins; ++bi)
        for (Index bj = 0; bj < bins; ++bj) {
          const auto cell = static_cast<std::size_t>(bi * bins + bj);
          out.push_back({i, j, bi, bj, tot[cell] > 0.0 ? hit[cell] / tot[cell] : 0.0});
        }
    }
  }
  return out;
}

double discrepancy_scale(double reconstruction_error, Index length, double j) {
  if (!(j > 0.0 && j < 0.995)) throw DomainError("discrepancy tuning level j must lie in (0, 0.995)");
  if (!(reconstruction_error > 0.0)) throw DomainError("reconstruction error must be positive");
  return reconstruction_error / chi2_threshold(length, j);
}

UncertaintySpec discrepancy_rescale(const RotationResult& rotation, const WeightMatrix& w,
                                    const Vector& z_anomaly, const WeightMatrix& sigma_e,
                                    double j) {
  const double r = reconstruction_error(rotation.basis, w, z_anomaly);
  return UncertaintySpec{sigma_e, w.scaled(discrepancy_scale(r, w.dim(), j))};
}

LogPrior uniform_log_prior(Index inputs) {
  const double inside = -static_cast<double>(inputs) * std::log(2.0);
  return [inputs, inside](const Vector& theta) {
    if (theta.size() != inputs) throw DimensionMismatch("prior: input dimension mismatch");
    for (Index d = 0; d < inputs; ++d)
      if (theta[d] < -1.0 || theta[d] > 1.0) return -std::numeric_limits<double>::infinity();
    return inside;
  };
}

double log_posterior_density(const ImplausibilityEvaluator& eval, const Vector& theta,
                             const LogPrior& prior) {
  const double lp = prior(theta);
  if (lp == -std::numeric_limits<double>::infinity()) return lp;
  return eval.log_likelihood(theta) + lp;
}

double posterior_density(const FieldEmulator& em, const Vector& theta, const Vector& z,
                         const UncertaintySpec& u, const LogPrior& prior) {
  const ImplausibilityEvaluator eval(borrow(em), z, u);
  return std::exp(log_posterior_density(eval, theta, prior));
}

}  // namespace calibasis
