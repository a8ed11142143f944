#pragma once

#include <string>
#include <vector>

#include "calibasis/basis.hpp"
#include "calibasis/gp.hpp"

namespace calibasis {

// Field-space prediction with covariance kept in factored form:
// retained diag(retained_var) retained^T + discarded diag(discarded_var) discarded^T.
struct FieldPrediction {
  Vector mean;
  Matrix retained;
  Vector retained_var;
  Matrix discarded;
  Vector discarded_var;

  // Only for l <= 1024.
  Matrix dense_covariance() const;
  double covariance_trace() const;
};

struct CoefficientMoments {
  Vector mean;
  Vector variance;
};

struct LooSummary {
  Matrix standardized;  // n x q
  double coverage = 0.0;  // share of |standardized| <= 3 over all entries
  std::vector<double> per_coefficient_coverage;
};

class FieldEmulator {
 public:
  FieldEmulator() = default;
  FieldEmulator(Basis retained, std::vector<CoefficientEmulator> emulators, Basis discarded,
                Vector discarded_variances, Vector mean, WeightMatrix w);

  Index q() const { return static_cast<Index>(emulators_.size()); }
  Index inputs() const;
  Index length() const { return mean_.size(); }

  const Basis& retained() const { return retained_; }
  const Basis& discarded() const { return discarded_; }
  const Vector& discarded_variances() const { return discarded_var_; }
  const Vector& mean() const { return mean_; }
  const WeightMatrix& weight() const { return w_; }
  const std::vector<CoefficientEmulator>& emulators() const { return emulators_; }

  CoefficientMoments predict_coefficients(const Vector& theta) const;
  FieldPrediction predict_field(const Vector& theta) const;
  LooSummary loo_validate() const;

 private:
  Basis retained_;
  std::vector<CoefficientEmulator> emulators_;
  Basis discarded_;
  Vector discarded_var_;
  Vector mean_;
  WeightMatrix w_;
};

// Fits one GP per retained coefficient: the first q vectors of basis are
// emulated, the rest are treated as discarded with their ensemble variance.
FieldEmulator fit_coefficient_emulators(const Ensemble& ensemble, const Basis& basis, Index q,
                                        const WeightMatrix& w, const GpSpec& spec);

}  // namespace calibasis
