#include "calibasis/demo.hpp"

#include <cmath>
#include <memory>

#include "calibasis/calibration.hpp"
#include "calibasis/error.hpp"

namespace calibasis {

void DemoConfig::validate() const {
  if (initial_design < 2) throw InvalidConfig("demo: initial design needs at least 2 points");
  if (steps < 0) throw InvalidConfig("demo: steps must be >= 0");
  if (!(lengthscale > 0.0)) throw InvalidConfig("demo: lengthscale must be positive");
  if (!(observation_sd > 0.0) || !(discrepancy_sd > 0.0))
    throw InvalidConfig("demo: standard deviations must be positive");
  if (grid < 3) throw InvalidConfig("demo: grid needs at least 3 points");
}

double demo_bumps(double theta) {
  const auto bump = [theta](double c, double h) {
    const double u = (theta - c) / 0.12;
    return h * std::exp(-u * u);
  };
  return bump(-0.6, 1.0) + bump(0.0, 1.6) + bump(0.6, 2.0);
}

namespace {

void summarise(const Vector& grid, const Vector& logp, DemoStep& s) {
  const double top = logp.maxCoeff();
  Vector p = (logp.array() - top).exp();
  p /= p.sum();
  Index imax = 0;
  p.maxCoeff(&imax);
  s.map = grid[imax];
  double cdf = 0.0;
  double lo = grid[0], hi = grid[grid.size() - 1];
  bool have_lo = false;
  for (Index i = 0; i < p.size(); ++i) {
    cdf += p[i];
    if (!have_lo && cdf >= 0.025) {
      lo = grid[i];
      have_lo = true;
    }
    if (cdf >= 0.975) {
      hi = grid[i];
      break;
    }
  }
  s.width95 = hi - lo;
  s.posterior = std::move(p);
}

}  // namespace

DemoTrajectory iterative_calibration_demo(const std::function<double(double)>& f,
                                          const DemoConfig& cfg) {
  cfg.validate();
  DemoTrajectory out;
  out.grid = Vector::LinSpaced(cfg.grid, -1.0, 1.0);
  std::vector<double> xs, ys;
  for (Index i = 0; i < cfg.initial_design; ++i) {
    const double x = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(cfg.initial_design - 1);
    xs.push_back(x);
    ys.push_back(f(x));
  }
  GpSpec gp;
  gp.mode = FitMode::fixed;
  gp.lengthscales = {cfg.lengthscale};
  gp.nugget = cfg.nugget;
  gp.regressors.kind = RegressorSpec::Kind::constant;
  const WeightMatrix unit = WeightMatrix::identity(1);
  const UncertaintySpec u{WeightMatrix::diagonal(Vector::Constant(1, cfg.observation_sd * cfg.observation_sd)),
                          WeightMatrix::diagonal(Vector::Constant(1, cfg.discrepancy_sd * cfg.discrepancy_sd))};
  const Vector z = Vector::Constant(1, cfg.observation);
  const LogPrior prior = uniform_log_prior(1);

  for (int step = 0; step <= cfg.steps; ++step) {
    if (step > 0) {
      const double x = out.steps.back().map;
      xs.push_back(x);
      ys.push_back(f(x));
    }
    const Index n = static_cast<Index>(xs.size());
    Matrix design = Eigen::Map<const Vector>(xs.data(), n);
    Matrix outputs = Eigen::Map<const Vector>(ys.data(), n).transpose();
    const Ensemble ens(design, outputs);
    const Basis basis = mark_orthonormal(Basis(Matrix::Ones(1, 1)), unit);
    auto em = std::make_shared<const FieldEmulator>(
        fit_coefficient_emulators(ens, basis, 1, unit, gp));
    const ImplausibilityEvaluator eval(em, z, u);

    DemoStep s;
    s.step = step;
    s.design = Eigen::Map<const Vector>(xs.data(), n);
    s.outputs = Eigen::Map<const Vector>(ys.data(), n);
    Vector logp(out.grid.size());
    s.emulator_mean.resize(out.grid.size());
    s.emulator_sd.resize(out.grid.size());
    for (Index i = 0; i < out.grid.size(); ++i) {
      const Vector theta = Vector::Constant(1, out.grid[i]);
      logp[i] = log_posterior_density(eval, theta, prior);
      const FieldPrediction fp = em->predict_field(theta);
      s.emulator_mean[i] = fp.mean[0];
      s.emulator_sd[i] = std::sqrt(fp.retained_var[0]);
    }
    summarise(out.grid, logp, s);
    out.steps.push_back(std::move(s));
  }
  return out;
}

}  // namespace calibasis
