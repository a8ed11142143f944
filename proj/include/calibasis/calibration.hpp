#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "calibasis/design.hpp"
#include "calibasis/emulator.hpp"
#include "calibasis/rotation.hpp"

namespace calibasis {

// Level-quantile of chi-squared with dof degrees of freedom.
double chi2_threshold(Index dof, double level);
// Pukelsheim's rule for a scalar observation.
inline constexpr double kThreeSigmaThreshold = 9.0;

struct UncertaintySpec {
  WeightMatrix sigma_e;
  WeightMatrix sigma_eta;

  Index dim() const { return sigma_e.dim(); }
  WeightMatrix total() const;
  void validate() const;
};

struct ImplausibilityOptions {
  // Add the discarded-basis variance to the emulator covariance.
  bool include_discarded = true;
};

// Field-space implausibility I(theta) with the observation-specific terms
// precomputed once; per-theta cost is q GP predictions plus a q x q solve.
class ImplausibilityEvaluator {
 public:
  ImplausibilityEvaluator(std::shared_ptr<const FieldEmulator> em, const Vector& z,
                          const UncertaintySpec& u, ImplausibilityOptions opts = {});

  double operator()(const Vector& theta) const;
  // log N(z; E f, Var f + Sigma_eta + Sigma_e).
  double log_likelihood(const Vector& theta) const;

  const FieldEmulator& emulator() const { return *em_; }
  Index inputs() const { return em_->inputs(); }

 private:
  struct Terms {
    double quad;
    double logdet_correction;
  };
  Terms evaluate(const Vector& theta) const;

  std::shared_ptr<const FieldEmulator> em_;
  double s0_ = 0.0;     // r0^T A^{-1} r0
  Vector b_;            // Gamma_q^T A^{-1} r0
  Matrix h_;            // Gamma_q^T A^{-1} Gamma_q
  double logdet_a_ = 0.0;
  Index length_ = 0;
};

double implausibility_field(const FieldEmulator& em, const Vector& theta, const Vector& z,
                            const UncertaintySpec& u, ImplausibilityOptions opts = {});
// Dense reference: builds the full l x l covariance. l <= 1024.
double implausibility_field_dense(const FieldEmulator& em, const Vector& theta, const Vector& z,
                                  const UncertaintySpec& u, ImplausibilityOptions opts = {});

enum class CoefficientProjection {
  printed,   // Gamma_q^T (z - mu) and Gamma_q^T Sigma Gamma_q
  weighted,  // W-projection of z - mu and of the covariances
};

double implausibility_coeff(const FieldEmulator& em, const Vector& theta, const Vector& z,
                            const UncertaintySpec& u,
                            CoefficientProjection mode = CoefficientProjection::printed);

// Membership in a (possibly chained) NROY set.
class NroyMembership {
 public:
  NroyMembership(std::shared_ptr<const ImplausibilityEvaluator> eval, double threshold,
                 std::shared_ptr<const NroyMembership> parent = nullptr);

  bool contains(const Vector& theta) const;
  // +inf when an ancestor rules theta out; own implausibility otherwise.
  double implausibility(const Vector& theta) const;
  bool in_parents(const Vector& theta) const;

  double threshold() const { return threshold_; }
  const std::shared_ptr<const NroyMembership>& parent() const { return parent_; }
  const ImplausibilityEvaluator& evaluator() const { return *eval_; }
  Index depth() const;

 private:
  std::shared_ptr<const ImplausibilityEvaluator> eval_;
  double threshold_;
  std::shared_ptr<const NroyMembership> parent_;
};

struct SamplerConfig {
  Index samples = 100000;
  std::uint64_t seed = 1;
  std::shared_ptr<const NroyMembership> parent;
};

struct WaveResult {
  double threshold = 0.0;
  double nroy_fraction = 0.0;
  double standard_error = 0.0;
  Index sample_count = 0;
  std::uint64_t seed = 0;
  Matrix samples;              // every Monte Carlo sample, one per row
  Vector implausibility;       // +inf where a parent wave rules the sample out
  std::vector<char> accepted;
  Matrix retained;             // accepted samples
  Vector retained_implausibility;
  std::shared_ptr<const NroyMembership> membership;
  std::string diagnostic;
};

WaveResult history_match(std::shared_ptr<const ImplausibilityEvaluator> eval, double threshold,
                         const SamplerConfig& sampler);

struct PairCell {
  Index param_i, param_j, bin_i, bin_j;
  double fraction;
};

// Share of samples accepted in each bin pair of each parameter pair.
std::vector<PairCell> nroy_pair_grid(const WaveResult& wave, Index bins);

// b = chi^2_{l, j} and the multiplier R / b.
double discrepancy_scale(double reconstruction_error, Index length, double j);
UncertaintySpec discrepancy_rescale(const RotationResult& rotation, const WeightMatrix& w,
                                    const Vector& z_anomaly, const WeightMatrix& sigma_e,
                                    double j);

using LogPrior = std::function<double(const Vector&)>;
// log(2^-p) inside [-1, 1]^p, -inf outside.
LogPrior uniform_log_prior(Index inputs);

double log_posterior_density(const ImplausibilityEvaluator& eval, const Vector& theta,
                             const LogPrior& prior);
double posterior_density(const FieldEmulator& em, const Vector& theta, const Vector& z,
                         const UncertaintySpec& u, const LogPrior& prior);

}  // namespace calibasis
