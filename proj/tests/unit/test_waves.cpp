#include <doctest.h>

#include "calibasis/design.hpp"
#include "calibasis/rng.hpp"
#include "calibasis/toy_model.hpp"
#include "calibasis/waves.hpp"

using namespace calibasis;

namespace {

struct Toy {
  ToyPatternSet patterns;
  ToyConfig cfg;
  Vector z;
  UncertaintySpec u;
  WeightMatrix w;
};

Toy make_toy(std::uint64_t seed) {
  Toy t{make_toy_patterns(derive_seed(seed, 1)), ToyConfig{}, Vector(), {}, {}};
  t.cfg.seed = derive_seed(seed, 4);
  t.z = toy_observe(t.patterns, t.cfg);
  t.u = UncertaintySpec{toy_sigma_e(), toy_sigma_eta()};
  t.w = t.u.total();
  return t;
}

}  // namespace

TEST_CASE("an SVD-only wave on the toy model stops at the terminal case or emulates") {
  const Toy t = make_toy(3);
  const Matrix d = maximin_lhs(30, 6, 5, 5);
  const Ensemble ens(d, toy_ensemble(d, t.patterns, t.cfg, 6));
  WaveSpec spec;
  spec.threshold = chi2_threshold(100, 0.995);
  spec.rotate = false;
  spec.samples = 2000;
  const WaveOutput out = run_wave(ens, t.z, t.u, t.w, spec);
  CHECK(out.svd_q >= 1);
  CHECK(out.svd_full_error <= out.svd_truncated_error + 1e-9);
  CHECK_FALSE(out.rotation.has_value());
  if (!out.terminal) {
    REQUIRE(out.history.has_value());
    CHECK(out.emulator->q() == out.q);
  }
}

TEST_CASE("a rotated wave emulates, and NROY designs stay inside NROY") {
  const Toy t = make_toy(4);
  const Matrix d = maximin_lhs(40, 6, 7, 5);
  const Ensemble ens(d, toy_ensemble(d, t.patterns, t.cfg, 8));
  WaveSpec spec;
  spec.threshold = 1e9;  // accepts most of the space; exercises the plumbing
  spec.samples = 3000;
  spec.rotation.v = {0.4, 0.1, 0.1};
  spec.rotation.annealer.steps_per_temperature = 30;
  const WaveOutput out = run_wave(ens, t.z, t.u, t.w, spec);
  REQUIRE(out.history.has_value());
  CHECK(out.history->nroy_fraction > 0.0);
  const Matrix nd = design_in_nroy(*out.history, 15, 9);
  CHECK(nd.rows() == 15);
  for (Index i = 0; i < nd.rows(); ++i) CHECK(out.history->membership->contains(nd.row(i).transpose()));
}
