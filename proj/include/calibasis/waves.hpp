#pragma once

#include <memory>
#include <optional>

#include "calibasis/calibration.hpp"

namespace calibasis {

struct WaveSpec {
  // Implausibility bound, also used for the rotation's reconstruction checks.
  double threshold = 0.0;
  double v_tot = 0.95;
  bool rotate = true;
  RotationConfig rotation;  // threshold and v_tot are overwritten from the fields above
  GpSpec gp;
  ImplausibilityOptions implausibility;
  Index samples = 100000;
  std::uint64_t seed = 1;
};

struct WaveOutput {
  Ensemble ensemble;
  WsvdResult svd;
  Index svd_q = 0;
  double svd_full_error = 0.0;
  double svd_truncated_error = 0.0;
  std::optional<RotationResult> rotation;
  Basis basis;  // full basis handed to the emulators
  Index q = 0;
  bool terminal = false;
  bool infeasible = false;
  std::shared_ptr<const FieldEmulator> emulator;
  std::shared_ptr<const ImplausibilityEvaluator> evaluator;
  std::optional<WaveResult> history;
  std::string diagnostic;
};

// Basis selection, emulation and history matching for one ensemble. Stops
// before emulation when the basis step reports a terminal or infeasible case.
WaveOutput run_wave(const Ensemble& ensemble, const Vector& z, const UncertaintySpec& u,
                    const WeightMatrix& w, const WaveSpec& spec,
                    std::shared_ptr<const NroyMembership> parent = nullptr);

// n maximin-spread points inside the NROY set of a finished wave. Draws more
// uniform samples through the membership if too few were retained.
Matrix design_in_nroy(const WaveResult& wave, Index n, std::uint64_t seed,
                      Index max_candidates = 5000);

}  // namespace calibasis
