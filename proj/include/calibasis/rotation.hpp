#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "calibasis/basis.hpp"

namespace calibasis {

struct AnnealConfig {
  // <= 0 means "use the objective at the starting point".
  double initial_temperature = 0.0;
  double cooling_rate = 0.95;
  int steps_per_temperature = 100;
  // Stop once T / T0 drops below this.
  double min_temperature = 1e-4;
  double proposal_scale = 0.2;
  // Proposal scale shrinks as sqrt(T / T0) but never below this fraction of proposal_scale.
  double proposal_floor = 0.02;
  std::uint64_t seed = 1;
  int restarts = 1;

  void validate() const;
};

struct RotationConfig {
  // Minimum variance share per optimised vector. Missing entries default to
  // half the share of the corresponding vector of the initial basis.
  std::vector<double> v;
  double v_tot = 0.95;
  double threshold = 0.0;
  int max_iterations = 10;
  AnnealConfig annealer;

  void validate() const;
};

enum class RotationStatus { converged, terminal_case, infeasible_v, iteration_cap };

const char* status_name(RotationStatus s);

struct RotationResult {
  Basis basis;        // truncated Gamma*_q
  Index q = 0;
  Basis full_basis;   // Gamma*
  std::vector<double> per_vector_variance;   // V_k of every vector of full_basis
  std::vector<double> reconstruction_trace;  // R_W(Gamma*_k, z) after iteration k
  std::vector<double> truncated_trace;       // R_W(Gamma*_q, z) after iteration k
  std::vector<double> v_used;                // constraint applied to each optimised vector
  RotationStatus status = RotationStatus::converged;
  Index optimized_vectors = 0;
  double full_basis_error = 0.0;   // R_W(initial, z)
  double truncated_error = 0.0;    // R_W(basis, z)
  double rotation_defect = 0.0;    // max |Lambda^T Lambda - I|
  std::string diagnostic;
};

struct TerminalCheck {
  bool terminal;
  double error;
};

TerminalCheck terminal_case_check(const Basis& b, const WeightMatrix& w, const Vector& z_anomaly,
                                  double threshold);

// Largest single-vector variance share attainable in span(search) after
// removing the span of previous.
double max_attainable_variance(const Basis& search, const WeightMatrix& w, const Matrix& centred,
                               const Basis& previous);

// One step of the rotation: the W-normalised combination of search vectors
// (made W-orthogonal to previous) minimising R_W([previous, gamma], z) subject
// to a single-vector variance share of at least v_k. Throws InfeasibleConstraint.
Vector optimize_vector(const Basis& search, const WeightMatrix& w, const Vector& z_anomaly,
                       const Matrix& centred, double v_k, const Basis& previous,
                       const AnnealConfig& cfg);

RotationResult optimal_rotation(const Matrix& centred, const WeightMatrix& w,
                                const Vector& z_anomaly, const RotationConfig& cfg,
                                const Basis& initial);

RotationResult rotation_with_physical_vectors(const Matrix& centred, const WeightMatrix& w,
                                              const Vector& z_anomaly, const RotationConfig& cfg,
                                              const Basis& physical);

}  // namespace calibasis
