#include <doctest.h>

#include <random>

#include "calibasis/error.hpp"
#include "calibasis/rotation.hpp"
#include "support/oracles.hpp"

using namespace calibasis;

namespace {

double defect(const Basis& b, const WeightMatrix& w) {
  const Matrix bt = w.whiten(b.vectors());
  return (bt.transpose() * bt - Matrix::Identity(b.size(), b.size())).cwiseAbs().maxCoeff();
}

AnnealConfig quick_anneal(std::uint64_t seed = 5) {
  AnnealConfig a;
  a.seed = seed;
  a.steps_per_temperature = 40;
  a.cooling_rate = 0.9;
  return a;
}

}  // namespace

TEST_CASE("reconstruction error is invariant to rotations of the basis") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const Index l = 10, k = 4;
    const Matrix s = oracle::random_spd(l, rng);
    const WeightMatrix w = WeightMatrix::dense(s);
    const Matrix b = oracle::random_matrix(l, k, rng);
    const Matrix lambda = oracle::random_orthogonal(k, rng);
    const Vector z = oracle::random_matrix(l, 1, rng);
    const double r0 = reconstruction_error(Basis(b), w, z);
    CHECK(std::abs(reconstruction_error(Basis(Matrix(b * lambda)), w, z) - r0) <= 1e-9 * (1 + r0));
  }
}

TEST_CASE("terminal-case check compares the full-basis error with the threshold") {
  std::mt19937_64 rng(32);
  const auto h = oracle::hidden_signal(12, 9, rng);
  const WeightMatrix w = WeightMatrix::dense(h.w);
  const WsvdResult svd = wsvd(h.centred, w);
  const Vector off = h.z + 3.0 * oracle::random_matrix(12, 1, rng);
  const TerminalCheck tc = terminal_case_check(svd.basis, w, off, 1e-6);
  CHECK(tc.terminal);
  CHECK(tc.error == doctest::Approx(reconstruction_error(svd.basis, w, off)));
  CHECK_FALSE(terminal_case_check(svd.basis, w, off, std::numeric_limits<double>::infinity()).terminal);
  CHECK(terminal_case_check(svd.basis, w, off, 0.0).terminal);
}

TEST_CASE("optimize_vector returns a W-unit vector orthogonal to the previous ones that meets v") {
  std::mt19937_64 rng(33);
  const auto h = oracle::hidden_signal(15, 10, rng);
  const WeightMatrix w = WeightMatrix::dense(h.w);
  const WsvdResult svd = wsvd(h.centred, w);
  const Basis prev = svd.basis.leading(1);
  const Basis search = svd.basis.trailing(1);
  const double vmax = max_attainable_variance(search, w, h.centred, prev);
  const Vector g = optimize_vector(search, w, h.z, h.centred, 0.5 * vmax, prev, quick_anneal());
  CHECK(w.quadratic(g) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(w_inner(g, prev.col(0), w)) < 1e-9);
  CHECK(variance_explained_single(g, w, h.centred) >= 0.5 * vmax - 1e-9);
  // No worse than the best single SVD vector satisfying the same constraint.
  const Basis with_g = prev.concat(Basis(Matrix(g)));
  double best_svd = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < search.size(); ++k)
    if (variance_explained_single(search.col(k), w, h.centred) >= 0.5 * vmax)
      best_svd = std::min(best_svd, reconstruction_error(prev.concat(search.leading(k + 1).trailing(k)), w, h.z));
  CHECK(reconstruction_error(with_g, w, h.z) <= best_svd + 1e-8);
}

TEST_CASE("optimize_vector rejects an unattainable variance share") {
  std::mt19937_64 rng(34);
  const auto h = oracle::hidden_signal(10, 8, rng);
  const WeightMatrix w = WeightMatrix::dense(h.w);
  const WsvdResult svd = wsvd(h.centred, w);
  const Basis none = mark_orthonormal(Basis(Matrix(10, 0)), w);
  const double vmax = max_attainable_variance(svd.basis, w, h.centred, none);
  CHECK(vmax == doctest::Approx(variance_explained_single(svd.basis.col(0), w, h.centred)).epsilon(1e-9));
  try {
    optimize_vector(svd.basis, w, h.z, h.centred, vmax + 0.01, none, quick_anneal());
    FAIL("expected InfeasibleConstraint");
  } catch (const InfeasibleConstraint& e) {
    CHECK(e.requested() == doctest::Approx(vmax + 0.01));
    CHECK(e.achievable() == doctest::Approx(vmax));
  }
}

TEST_CASE("optimal rotation converges, stays a rotation and keeps the trace nonincreasing") {
  std::mt19937_64 rng(35);
  for (int rep = 0; rep < 5; ++rep) {
    const auto h = oracle::hidden_signal(18, 12, rng);
    const WeightMatrix w = WeightMatrix::dense(h.w);
    const WsvdResult svd = wsvd(h.centred, w);
    const double full = reconstruction_error(svd.basis, w, h.z);
    const Index q = truncation_for_variance(svd.basis, w, h.centred, 0.95);
    const double trunc = reconstruction_error(svd.basis.leading(q), w, h.z);
    REQUIRE(trunc > full + 1.0);
    RotationConfig cfg;
    cfg.threshold = 0.5 * (full + trunc);
    cfg.v = {0.3, 0.05};
    cfg.annealer = quick_anneal(static_cast<std::uint64_t>(rep + 1));
    const RotationResult r = optimal_rotation(h.centred, w, h.z, cfg, svd.basis);
    CHECK(r.status == RotationStatus::converged);
    CHECK(r.truncated_error < cfg.threshold);
    CHECK(r.truncated_error == doctest::Approx(reconstruction_error(r.basis, w, h.z)));
    CHECK(r.full_basis.size() == svd.basis.size());
    CHECK(defect(r.full_basis, w) < 1e-8);
    CHECK(r.rotation_defect < 1e-6);
    CHECK(r.q >= r.optimized_vectors);
    CHECK(variance_explained(r.basis, w, h.centred) >= 0.95 - 1e-9);
    for (std::size_t i = 0; i < r.v_used.size(); ++i)
      CHECK(r.per_vector_variance[i] >= r.v_used[i] - 1e-9);
    for (std::size_t i = 1; i < r.reconstruction_trace.size(); ++i)
      CHECK(r.reconstruction_trace[i] <= r.reconstruction_trace[i - 1] + 1e-9);
    // The full rotated basis spans the same space.
    CHECK(reconstruction_error(r.full_basis, w, h.z) == doctest::Approx(full).epsilon(1e-6));
  }
}

TEST_CASE("optimal rotation reports the terminal case without optimising") {
  std::mt19937_64 rng(36);
  auto h = oracle::hidden_signal(12, 8, rng);
  const WeightMatrix w = WeightMatrix::dense(h.w);
  const WsvdResult svd = wsvd(h.centred, w);
  RotationConfig cfg;
  const Vector z = h.z + 5.0 * oracle::random_matrix(12, 1, rng);
  cfg.threshold = 0.5 * reconstruction_error(svd.basis, w, z);
  const RotationResult r = optimal_rotation(h.centred, w, z, cfg, svd.basis);
  CHECK(r.status == RotationStatus::terminal_case);
  CHECK(r.optimized_vectors == 0);
  CHECK_FALSE(r.diagnostic.empty());
}

TEST_CASE("optimal rotation exits early when the truncated basis already passes") {
  std::mt19937_64 rng(37);
  const auto h = oracle::hidden_signal(12, 8, rng);
  const WeightMatrix w = WeightMatrix::dense(h.w);
  const WsvdResult svd = wsvd(h.centred, w);
  RotationConfig cfg;
  cfg.threshold = 1e9;
  const RotationResult r = optimal_rotation(h.centred, w, h.z, cfg, svd.basis);
  CHECK(r.status == RotationStatus::converged);
  CHECK(r.optimized_vectors == 0);
  CHECK((r.full_basis.vectors() - svd.basis.vectors()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("optimal rotation reports infeasible v") {
  std::mt19937_64 rng(38);
  const auto h = oracle::hidden_signal(12, 8, rng);
  const WeightMatrix w = WeightMatrix::dense(h.w);
  const WsvdResult svd = wsvd(h.centred, w);
  const Index q = truncation_for_variance(svd.basis, w, h.centred, 0.95);
  RotationConfig cfg;
  cfg.threshold = 0.5 * (reconstruction_error(svd.basis, w, h.z) +
                         reconstruction_error(svd.basis.leading(q), w, h.z));
  cfg.v = {0.999};
  const RotationResult r = optimal_rotation(h.centred, w, h.z, cfg, svd.basis);
  CHECK(r.status == RotationStatus::infeasible_v);
}

TEST_CASE("rotation is deterministic under the seed") {
  std::mt19937_64 rng(39);
  const auto h = oracle::hidden_signal(14, 10, rng);
  const WeightMatrix w = WeightMatrix::dense(h.w);
  const WsvdResult svd = wsvd(h.centred, w);
  const Index q = truncation_for_variance(svd.basis, w, h.centred, 0.95);
  RotationConfig cfg;
  cfg.threshold = 0.5 * (reconstruction_error(svd.basis, w, h.z) +
                         reconstruction_error(svd.basis.leading(q), w, h.z));
  cfg.annealer = quick_anneal(9);
  cfg.annealer.restarts = 3;
  const RotationResult a = optimal_rotation(h.centred, w, h.z, cfg, svd.basis);
  const RotationResult b = optimal_rotation(h.centred, w, h.z, cfg, svd.basis);
  CHECK((a.full_basis.vectors() - b.full_basis.vectors()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("physical vectors lead the search and the basis stays W-orthonormal") {
  std::mt19937_64 rng(40);
  const auto h = oracle::hidden_signal(14, 10, rng);
  const WeightMatrix w = WeightMatrix::dense(h.w);
  const WsvdResult svd = wsvd(h.centred, w);
  const Index q = truncation_for_variance(svd.basis, w, h.centred, 0.95);
  RotationConfig cfg;
  cfg.threshold = 0.5 * (reconstruction_error(svd.basis, w, h.z) +
                         reconstruction_error(svd.basis.leading(q), w, h.z));
  cfg.annealer = quick_anneal();
  const Basis phys(Matrix(h.z));
  const RotationResult r = rotation_with_physical_vectors(h.centred, w, h.z, cfg, phys);
  CHECK(r.status != RotationStatus::terminal_case);
  CHECK(defect(r.full_basis, w) < 1e-8);
}

TEST_CASE("configuration validation") {
  RotationConfig cfg;
  cfg.v = {1.2};
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  AnnealConfig a;
  a.cooling_rate = 1.0;
  CHECK_THROWS_AS(a.validate(), InvalidConfig);
  a = AnnealConfig{};
  a.restarts = 0;
  CHECK_THROWS_AS(a.validate(), InvalidConfig);
}
