#include "calibasis/waves.hpp"

#include "calibasis/design.hpp"
#include "calibasis/error.hpp"
#include "calibasis/rng.hpp"

namespace calibasis {

WaveOutput run_wave(const Ensemble& ensemble, const Vector& z, const UncertaintySpec& u,
                    const WeightMatrix& w, const WaveSpec& spec,
                    std::shared_ptr<const NroyMembership> parent) {
  if (z.size() != ensemble.length() || w.dim() != ensemble.length() ||
      u.dim() != ensemble.length())
    throw DimensionMismatch("wave: observation, weight, uncertainty and ensemble lengths differ");
  WaveOutput out;
  out.ensemble = ensemble;
  const Vector za = z - ensemble.mean();
  out.svd = wsvd(ensemble.centred(), w);
  if (out.svd.basis.empty()) throw DegenerateEnsemble(out.svd.diagnostic);
  out.svd_q = truncation_for_variance(out.svd.basis, w, ensemble.centred(), spec.v_tot);
  out.svd_full_error = reconstruction_error(out.svd.basis, w, za);
  out.svd_truncated_error = reconstruction_error(out.svd.basis.leading(out.svd_q), w, za);
  out.basis = out.svd.basis;
  out.q = out.svd_q;

  if (spec.rotate) {
    RotationConfig rc = spec.rotation;
    rc.threshold = spec.threshold;
    rc.v_tot = spec.v_tot;
    rc.annealer.seed = derive_seed(spec.seed, 1);
    RotationResult rot = optimal_rotation(ensemble.centred(), w, za, rc, out.svd.basis);
    out.terminal = rot.status == RotationStatus::terminal_case;
    out.infeasible = rot.status == RotationStatus::infeasible_v;
    out.diagnostic = rot.diagnostic;
    out.basis = rot.full_basis;
    out.q = rot.q;
    out.rotation = std::move(rot);
  } else if (out.svd_full_error > spec.threshold) {
    out.terminal = true;
    out.diagnostic = "terminal case on the full SVD basis";
  }
  if (out.terminal || out.infeasible) return out;

  out.emulator = std::make_shared<const FieldEmulator>(
      fit_coefficient_emulators(ensemble, out.basis, out.q, w, spec.gp));
  out.evaluator = std::make_shared<const ImplausibilityEvaluator>(out.emulator, z, u,
                                                                  spec.implausibility);
  SamplerConfig sc;
  sc.samples = spec.samples;
  sc.seed = derive_seed(spec.seed, 2);
  sc.parent = std::move(parent);
  out.history = history_match(out.evaluator, spec.threshold, sc);
  return out;
}

Matrix design_in_nroy(const WaveResult& wave, Index n, std::uint64_t seed, Index max_candidates) {
  if (!wave.membership) throw Error("design_in_nroy: wave has no membership function");
  Matrix cand = wave.retained.topRows(std::min(wave.retained.rows(), max_candidates));
  std::uint64_t round = 0;
  while (cand.rows() < n) {
    if (++round > 50)
      throw DomainError("design_in_nroy: NROY space too small to place " + std::to_string(n) +
                        " runs");
    const Matrix extra = uniform_samples(std::max<Index>(wave.sample_count, 10000),
                                         wave.samples.cols(), derive_seed(seed, round));
    std::vector<Index> keep;
    for (Index i = 0; i < extra.rows() && cand.rows() + static_cast<Index>(keep.size()) < max_candidates; ++i)
      if (wave.membership->contains(extra.row(i).transpose())) keep.push_back(i);
    Matrix grown(cand.rows() + static_cast<Index>(keep.size()), cand.cols());
    grown.topRows(cand.rows()) = cand;
    for (std::size_t k = 0; k < keep.size(); ++k)
      grown.row(cand.rows() + static_cast<Index>(k)) = extra.row(keep[k]);
    cand = std::move(grown);
  }
  return maximin_subset(cand, n, seed);
}

}  // namespace calibasis
