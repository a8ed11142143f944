#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "calibasis/emulator.hpp"
#include "calibasis/error.hpp"
#include "support/oracles.hpp"

using namespace calibasis;

namespace {

struct Setup {
  Ensemble ens;
  WeightMatrix w;
  Basis basis;
};

// Outputs are smooth functions of two inputs along a few fixed patterns.
Setup make_setup(std::mt19937_64& rng, Index l = 12, Index n = 20, bool linear = false) {
  const Matrix pats = oracle::random_matrix(l, 3, rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix x(n, 2), f(l, n);
  for (Index j = 0; j < n; ++j) {
    x(j, 0) = u(rng);
    x(j, 1) = u(rng);
    const double a = linear ? 2.0 * x(j, 0) - x(j, 1) : std::sin(2.0 * x(j, 0));
    const double b = linear ? x(j, 1) : x(j, 0) * x(j, 1);
    const double c = linear ? 0.5 * x(j, 0) : x(j, 1) * x(j, 1);
    f.col(j) = 3.0 * a * pats.col(0) + b * pats.col(1) + 0.3 * c * pats.col(2);
  }
  Setup s{Ensemble(x, f), WeightMatrix::dense(oracle::random_spd(l, rng, 1.0)), Basis()};
  s.basis = wsvd(s.ens.centred(), s.w).basis;
  return s;
}

GpSpec fixed(double nugget) {
  GpSpec g;
  g.mode = FitMode::fixed;
  g.lengthscales = {0.8};
  g.nugget = nugget;
  return g;
}

}  // namespace

TEST_CASE("at a training input with nugget 0 the mean field reconstructs the run") {
  std::mt19937_64 rng(51);
  const Setup s = make_setup(rng);
  const Index q = 2;
  const FieldEmulator em = fit_coefficient_emulators(s.ens, s.basis, q, s.w, fixed(0.0));
  const Basis bq = s.basis.leading(q);
  for (Index j = 0; j < s.ens.runs(); ++j) {
    const Vector theta = s.ens.design().row(j).transpose();
    const Vector recon = s.ens.mean() + bq.vectors() * w_project(bq, s.w, Vector(s.ens.centred().col(j)));
    const FieldPrediction p = em.predict_field(theta);
    CHECK((p.mean - recon).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + recon.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("coefficient moments come from the individual GPs") {
  std::mt19937_64 rng(52);
  const Setup s = make_setup(rng);
  const FieldEmulator em = fit_coefficient_emulators(s.ens, s.basis, 3, s.w, GpSpec{});
  const Vector theta = (Vector(2) << 0.1, -0.4).finished();
  const CoefficientMoments m = em.predict_coefficients(theta);
  REQUIRE(m.mean.size() == 3);
  for (Index k = 0; k < 3; ++k) {
    const GpPrediction p = em.emulators()[static_cast<std::size_t>(k)].predict(theta);
    CHECK(m.mean[k] == p.mean);
    CHECK(m.variance[k] == p.variance);
  }
}

TEST_CASE("field covariance: dense form is symmetric PSD and its trace matches") {
  std::mt19937_64 rng(53);
  const Setup s = make_setup(rng);
  const FieldEmulator em = fit_coefficient_emulators(s.ens, s.basis, 2, s.w, GpSpec{});
  const FieldPrediction p = em.predict_field((Vector(2) << 0.7, 0.2).finished());
  const Matrix c = p.dense_covariance();
  CHECK((c - c.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> es(c);
  CHECK(es.eigenvalues().minCoeff() >= -1e-9 * (1.0 + es.eigenvalues().maxCoeff()));
  CHECK(p.covariance_trace() == doctest::Approx(c.trace()).epsilon(1e-10));
}

TEST_CASE("discarded variances are the sample variances of the discarded coefficients") {
  std::mt19937_64 rng(54);
  const Setup s = make_setup(rng);
  const Index q = 1;
  const FieldEmulator em = fit_coefficient_emulators(s.ens, s.basis, q, s.w, GpSpec{});
  const Basis rest = s.basis.trailing(q);
  REQUIRE(em.discarded().size() == rest.size());
  const Matrix c = w_project(rest, s.w, s.ens.centred());
  for (Index k = 0; k < rest.size(); ++k) {
    const double mean = c.row(k).mean();
    const double var = (c.row(k).array() - mean).square().sum() / static_cast<double>(s.ens.runs() - 1);
    CHECK(em.discarded_variances()[k] == doctest::Approx(var).epsilon(1e-9).scale(1e-12));
  }
}

TEST_CASE("linear outputs with linear regressors give near-zero LOO errors") {
  std::mt19937_64 rng(55);
  const Setup s = make_setup(rng, 10, 15, true);
  GpSpec spec = fixed(1e-8);
  spec.lengthscales = {5.0};
  const FieldEmulator em = fit_coefficient_emulators(s.ens, s.basis, 2, s.w, spec);
  for (const auto& gp : em.emulators())
    for (const auto& e : gp.loo()) CHECK(std::abs(e.residual) < 1e-5);
}

TEST_CASE("LOO summary shape and coverage range") {
  std::mt19937_64 rng(56);
  const Setup s = make_setup(rng);
  const FieldEmulator em = fit_coefficient_emulators(s.ens, s.basis, 2, s.w, GpSpec{});
  const LooSummary loo = em.loo_validate();
  CHECK(loo.standardized.rows() == s.ens.runs());
  CHECK(loo.standardized.cols() == 2);
  CHECK(loo.coverage >= 0.0);
  CHECK(loo.coverage <= 1.0);
  CHECK(loo.per_coefficient_coverage.size() == 2);
}

TEST_CASE("invalid q and mismatched inputs are rejected") {
  std::mt19937_64 rng(57);
  const Setup s = make_setup(rng);
  CHECK_THROWS(fit_coefficient_emulators(s.ens, s.basis, s.basis.size() + 1, s.w, GpSpec{}));
  CHECK_THROWS(fit_coefficient_emulators(s.ens, s.basis, 0, s.w, GpSpec{}));
  const FieldEmulator em = fit_coefficient_emulators(s.ens, s.basis, 1, s.w, GpSpec{});
  CHECK_THROWS_AS(em.predict_field(Vector::Zero(3)), DimensionMismatch);
}
