#pragma once

#include <functional>
#include <vector>

#include "calibasis/types.hpp"

namespace calibasis {

struct DemoConfig {
  Index initial_design = 6;
  int steps = 20;
  double lengthscale = 0.15;
  double nugget = 1e-6;
  double observation = 3.0;
  double observation_sd = 0.03;
  double discrepancy_sd = 0.04;
  Index grid = 2001;

  void validate() const;
};

struct DemoStep {
  int step = 0;
  Vector design;     // inputs evaluated so far
  Vector outputs;
  double map = 0.0;
  double width95 = 0.0;
  Vector posterior;  // normalised to unit mass on the grid
  Vector emulator_mean;
  Vector emulator_sd;
};

struct DemoTrajectory {
  Vector grid;
  std::vector<DemoStep> steps;  // step 0 is the initial design
};

// Three Gaussian bumps of heights 1, 1.6 and 2 on [-1, 1].
double demo_bumps(double theta);

// Repeatedly: fit a fixed-lengthscale GP, compute the posterior for theta on a
// grid under a uniform prior, then run f at the MAP and add it to the design.
DemoTrajectory iterative_calibration_demo(const std::function<double(double)>& f,
                                          const DemoConfig& cfg);

}  // namespace calibasis
