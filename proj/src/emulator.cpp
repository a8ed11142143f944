#include "calibasis/emulator.hpp"

#include <cmath>
#include <exception>
#include <string>

#include "calibasis/error.hpp"

namespace calibasis {

Matrix FieldPrediction::dense_covariance() const {
  if (mean.size() > 1024) throw Error("dense field covariance is limited to l <= 1024");
  Matrix c = Matrix::Zero(mean.size(), mean.size());
  if (retained.cols() > 0) c += retained * retained_var.asDiagonal() * retained.transpose();
  if (discarded.cols() > 0) c += discarded * discarded_var.asDiagonal() * discarded.transpose();
  return c;
}

double FieldPrediction::covariance_trace() const {
  double t = 0.0;
  for (Index k = 0; k < retained.cols(); ++k) t += retained_var[k] * retained.col(k).squaredNorm();
  for (Index k = 0; k < discarded.cols(); ++k)
    t += discarded_var[k] * discarded.col(k).squaredNorm();
  return t;
}

FieldEmulator::FieldEmulator(Basis retained, std::vector<CoefficientEmulator> emulators,
                             Basis discarded, Vector discarded_variances, Vector mean,
                             WeightMatrix w)
    : retained_(std::move(retained)),
      emulators_(std::move(emulators)),
      discarded_(std::move(discarded)),
      discarded_var_(std::move(discarded_variances)),
      mean_(std::move(mean)),
      w_(std::move(w)) {
  if (retained_.size() != static_cast<Index>(emulators_.size()))
    throw DimensionMismatch("field emulator: one coefficient emulator per retained vector");
  if (discarded_.size() != discarded_var_.size())
    throw DimensionMismatch("field emulator: one variance per discarded vector");
  if (mean_.size() != w_.dim() || (!retained_.empty() && retained_.length() != mean_.size()) ||
      (!discarded_.empty() && discarded_.length() != mean_.size()))
    throw DimensionMismatch("field emulator: inconsistent field lengths");
  if (emulators_.empty()) throw DimensionMismatch("field emulator needs at least one coefficient");
  for (const auto& e : emulators_)
    if (e.inputs().cols() != emulators_.front().inputs().cols())
      throw DimensionMismatch("field emulator: coefficient emulators disagree on input count");
}

Index FieldEmulator::inputs() const {
  return emulators_.empty() ? 0 : emulators_.front().inputs().cols();
}

CoefficientMoments FieldEmulator::predict_coefficients(const Vector& theta) const {
  CoefficientMoments m{Vector(q()), Vector(q())};
  for (Index i = 0; i < q(); ++i) {
    const GpPrediction p = emulators_[static_cast<std::size_t>(i)].predict(theta);
    m.mean[i] = p.mean;
    m.variance[i] = p.variance;
  }
  return m;
}

FieldPrediction FieldEmulator::predict_field(const Vector& theta) const {
  const CoefficientMoments c = predict_coefficients(theta);
  FieldPrediction out;
  out.mean = mean_ + retained_.vectors() * c.mean;
  out.retained = retained_.vectors();
  out.retained_var = c.variance;
  out.discarded = discarded_.vectors();
  out.discarded_var = discarded_var_;
  return out;
}

LooSummary FieldEmulator::loo_validate() const {
  LooSummary s;
  const Index n = emulators_.front().inputs().rows();
  if (n < 5) throw DomainError("leave-one-out validation needs at least 5 runs");
  s.standardized.resize(n, q());
  Index inside = 0;
  for (Index i = 0; i < q(); ++i) {
    const auto entries = emulators_[static_cast<std::size_t>(i)].loo();
    Index in_i = 0;
    for (Index j = 0; j < n; ++j) {
      const double z = entries[static_cast<std::size_t>(j)].standardized;
      s.standardized(j, i) = z;
      if (std::abs(z) <= 3.0) ++in_i;
    }
    inside += in_i;
    s.per_coefficient_coverage.push_back(static_cast<double>(in_i) / static_cast<double>(n));
  }
  s.coverage = static_cast<double>(inside) / static_cast<double>(n * q());
  return s;
}

FieldEmulator fit_coefficient_emulators(const Ensemble& ensemble, const Basis& basis, Index q,
                                        const WeightMatrix& w, const GpSpec& spec) {
  if (basis.length() != ensemble.length() || w.dim() != ensemble.length())
    throw DimensionMismatch("fit_coefficient_emulators: basis/weight/ensemble lengths differ");
  if (q <= 0 || q > basis.size())
    throw DimensionMismatch("fit_coefficient_emulators: q must lie in [1, basis size]");
  if (!basis.is_orthonormal())
    throw Error("fit_coefficient_emulators: basis must be W-orthonormal");
  const Basis retained = basis.leading(q);
  const Basis discarded = basis.trailing(q);
  const Matrix coeffs = w_project(retained, w, ensemble.centred());  // q x n
  Vector discarded_var(discarded.size());
  if (!discarded.empty()) {
    const Matrix dc = w_project(discarded, w, ensemble.centred());
    const double denom = ensemble.runs() > 1 ? static_cast<double>(ensemble.runs() - 1) : 1.0;
    discarded_var = dc.rowwise().squaredNorm() / denom;
  }
  std::vector<CoefficientEmulator> ems(static_cast<std::size_t>(q));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(q));
#pragma omp parallel for schedule(dynamic)
  for (Index i = 0; i < q; ++i) {
    try {
      ems[static_cast<std::size_t>(i)] =
          CoefficientEmulator::fit(ensemble.design(), coeffs.row(i).transpose(), spec);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return FieldEmulator(retained, std::move(ems), discarded, std::move(discarded_var),
                       ensemble.mean(), w);
}

}  // namespace calibasis
