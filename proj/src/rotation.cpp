#include "calibasis/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "calibasis/error.hpp"
#include "calibasis/rng.hpp"

namespace calibasis {

const char* status_name(RotationStatus s) {
  switch (s) {
    case RotationStatus::converged: return "converged";
    case RotationStatus::terminal_case: return "terminal_case";
    case RotationStatus::infeasible_v: return "infeasible_v";
    case RotationStatus::iteration_cap: return "iteration_cap";
  }
  return "unknown";
}

void AnnealConfig::validate() const {
  if (!(cooling_rate > 0.0 && cooling_rate < 1.0))
    throw InvalidConfig("annealer cooling_rate must lie in (0, 1)");
  if (steps_per_temperature <= 0) throw InvalidConfig("annealer steps_per_temperature must be positive");
  if (!(min_temperature > 0.0 && min_temperature < 1.0))
    throw InvalidConfig("annealer min_temperature must lie in (0, 1)");
  if (!(proposal_scale > 0.0)) throw InvalidConfig("annealer proposal_scale must be positive");
  if (!(proposal_floor > 0.0 && proposal_floor <= 1.0))
    throw InvalidConfig("annealer proposal_floor must lie in (0, 1]");
  if (restarts <= 0) throw InvalidConfig("annealer restarts must be positive");
}

void RotationConfig::validate() const {
  for (double vk : v)
    if (!(vk >= 0.0 && vk < 1.0)) throw InvalidConfig("rotation v entries must lie in [0, 1)");
  if (!(v_tot > 0.0 && v_tot <= 1.0)) throw InvalidConfig("rotation v_tot must lie in (0, 1]");
  if (std::isnan(threshold)) throw InvalidConfig("rotation threshold is NaN");
  if (max_iterations <= 0) throw InvalidConfig("rotation max_iterations must be positive");
  annealer.validate();
}

TerminalCheck terminal_case_check(const Basis& b, const WeightMatrix& w, const Vector& z_anomaly,
                                  double threshold) {
  const double r = reconstruction_error(b, w, z_anomaly);
  return {!(threshold > 0.0) || r > threshold, r};
}

namespace {

// Orthonormal whitened coordinates for a search problem.
struct SearchSpace {
  Matrix u;         // l x m, orthonormal columns
  Vector a;         // U^T z_r
  Matrix c;         // (U^T F)(U^T F)^T
  double total = 0; // ||F||^2 whitened
  double base = 0;  // ||z_r||^2, error with previous vectors only
  double top_share = 0;
  Vector top;       // leading eigenvector of c
};

Matrix orthonormal_columns(const Matrix& x, Index& kept) {
  Matrix q(x.rows(), x.cols());
  kept = 0;
  for (Index k = 0; k < x.cols(); ++k) {
    Vector v = x.col(k);
    const double original = v.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (Index j = 0; j < kept; ++j) v -= q.col(j).dot(v) * q.col(j);
    const double nv = v.norm();
    if (original > 0.0 && nv > 1e-10 * original) q.col(kept++) = v / nv;
  }
  return q.leftCols(kept);
}

SearchSpace build_search(const Basis& search, const WeightMatrix& w, const Vector& z,
                         const Matrix& centred, const Basis& previous) {
  if (search.length() != w.dim() || z.size() != w.dim() || centred.rows() != w.dim())
    throw DimensionMismatch("optimize_vector: inconsistent dimensions");
  if (!previous.empty() && previous.length() != w.dim())
    throw DimensionMismatch("optimize_vector: previous basis length mismatch");
  SearchSpace s;
  const Matrix ft = w.whiten(centred);
  s.total = ft.squaredNorm();
  if (!(s.total > 0.0)) throw DegenerateEnsemble("ensemble has no weighted variance");
  Vector zr = w.whiten(z);
  Matrix st = w.whiten(search.vectors());
  if (!previous.empty()) {
    Index kp = 0;
    const Matrix p = orthonormal_columns(w.whiten(previous.vectors()), kp);
    for (int pass = 0; pass < 2; ++pass) {
      st -= p * (p.transpose() * st);
      zr -= p * (p.transpose() * zr);
    }
  }
  Index m = 0;
  s.u = orthonormal_columns(st, m);
  if (m == 0) throw RankDeficient("optimize_vector: empty search space");
  s.a = s.u.transpose() * zr;
  const Matrix g = s.u.transpose() * ft;
  s.c = g * g.transpose();
  s.base = zr.squaredNorm();
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.c);
  s.top = es.eigenvectors().col(m - 1);
  s.top_share = es.eigenvalues()[m - 1] / s.total;
  return s;
}

struct Chain {
  Vector best;
  double best_obj;
};

Chain anneal(const SearchSpace& s, double v_k, const AnnealConfig& cfg, std::uint64_t seed,
             const Vector& start) {
  const Index m = s.u.cols();
  const double need = v_k * s.total;
  auto objective = [&](const Vector& l) {
    const double p = l.dot(s.a);
    return s.base - p * p;
  };
  Vector cur = start;
  double cur_obj = objective(cur);
  Chain out{cur, cur_obj};
  if (m == 1) return out;
  const double t0 = cfg.initial_temperature > 0.0 ? cfg.initial_temperature : cur_obj;
  if (!(t0 > 0.0)) return out;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double per_coord = cfg.proposal_scale / std::sqrt(static_cast<double>(m));
  Vector prop(m);
  for (double t = t0; t > cfg.min_temperature * t0; t *= cfg.cooling_rate) {
    const double scale = per_coord * std::max(cfg.proposal_floor, std::sqrt(t / t0));
    for (int step = 0; step < cfg.steps_per_temperature; ++step) {
      for (Index i = 0; i < m; ++i) prop[i] = cur[i] + scale * normal(rng);
      const double nrm = prop.norm();
      if (!(nrm > 0.0)) continue;
      prop /= nrm;
      if (prop.dot(s.c * prop) < need) continue;
      const double obj = objective(prop);
      const double delta = obj - cur_obj;
      if (delta <= 0.0 || unif(rng) < std::exp(-delta / t)) {
        cur = prop;
        cur_obj = obj;
        if (cur_obj < out.best_obj) {
          out.best = cur;
          out.best_obj = cur_obj;
        }
      }
    }
  }
  return out;
}

}  // namespace

double max_attainable_variance(const Basis& search, const WeightMatrix& w, const Matrix& centred,
                               const Basis& previous) {
  return build_search(search, w, Vector::Zero(w.dim()), centred, previous).top_share;
}

Vector optimize_vector(const Basis& search, const WeightMatrix& w, const Vector& z_anomaly,
                       const Matrix& centred, double v_k, const Basis& previous,
                       const AnnealConfig& cfg) {
  cfg.validate();
  const SearchSpace s = build_search(search, w, z_anomaly, centred, previous);
  if (v_k > s.top_share)
    throw InfeasibleConstraint(v_k, s.top_share, static_cast<std::size_t>(previous.size()));

  // Start from the leading variance direction, which is always feasible, or
  // from the unconstrained optimum when that happens to satisfy the constraint.
  Vector start = s.top;
  const double an = s.a.norm();
  if (an > 0.0) {
    const Vector direct = s.a / an;
    if (direct.dot(s.c * direct) >= v_k * s.total) start = direct;
  }

  std::vector<Chain> chains(static_cast<std::size_t>(cfg.restarts));
#pragma omp parallel for schedule(static) if (cfg.restarts > 1)
  for (int r = 0; r < cfg.restarts; ++r)
    chains[static_cast<std::size_t>(r)] =
        anneal(s, v_k, cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(r)), start);
  std::size_t best = 0;
  for (std::size_t r = 1; r < chains.size(); ++r)
    if (chains[r].best_obj < chains[best].best_obj) best = r;

  Vector gt = s.u * chains[best].best;
  gt /= gt.norm();
  return w.unwhiten(gt);
}

namespace {

using SearchFn = std::function<Basis(const Basis& gamma, const Basis& eps)>;
using CompleteFn = std::function<Basis(const Basis& gamma, const Basis& eps)>;

std::vector<double> shares(const Basis& b, const WeightMatrix& w, const Matrix& centred) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(b.size()));
  for (Index k = 0; k < b.size(); ++k)
    out.push_back(variance_explained_single(b.col(k), w, centred));
  return out;
}

double rotation_defect(const Basis& reference, const Basis& rotated, const WeightMatrix& w) {
  if (reference.empty() || rotated.empty()) return 0.0;
  const Matrix lambda = w_project(reference, w, rotated.vectors());
  const Matrix g = lambda.transpose() * lambda;
  return (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

void finalise(RotationResult& res, const Basis& full, Index min_q, const WeightMatrix& w,
              const Vector& z, const Matrix& centred, double v_tot) {
  res.full_basis = full;
  res.per_vector_variance = shares(full, w, centred);
  res.q = std::max(min_q, truncation_for_variance(full, w, centred, v_tot));
  res.q = std::min(res.q, full.size());
  res.basis = full.leading(res.q);
  res.truncated_error = reconstruction_error(res.basis, w, z);
}

RotationResult run_rotation(const Matrix& centred, const WeightMatrix& w, const Vector& z,
                            const RotationConfig& cfg, const Basis& span_basis,
                            const std::vector<double>& default_shares, const Basis& eps0,
                            const SearchFn& search_fn, const CompleteFn& complete_fn) {
  cfg.validate();
  if (z.size() != w.dim() || centred.rows() != w.dim())
    throw DimensionMismatch("optimal_rotation: inconsistent dimensions");
  if (span_basis.empty()) throw DegenerateEnsemble("optimal_rotation: initial basis is empty");

  RotationResult res;
  const TerminalCheck check = terminal_case_check(span_basis, w, z, cfg.threshold);
  res.full_basis_error = check.error;
  if (check.terminal) {
    finalise(res, span_basis, 0, w, z, centred, cfg.v_tot);
    res.status = RotationStatus::terminal_case;
    res.diagnostic = cfg.threshold > 0.0
                         ? "terminal case: full-basis reconstruction error " +
                               std::to_string(check.error) + " exceeds threshold " +
                               std::to_string(cfg.threshold)
                         : "terminal case: threshold is not positive";
    return res;
  }

  // Step-4 early exit: the given basis truncated at v_tot may already suffice.
  finalise(res, span_basis, 0, w, z, centred, cfg.v_tot);
  if (res.truncated_error < cfg.threshold) {
    res.status = RotationStatus::converged;
    res.diagnostic = "truncated initial basis already reconstructs the observation";
    return res;
  }

  Basis gamma = mark_orthonormal(Basis(Matrix(w.dim(), 0)), w);
  Basis eps = eps0;
  res.status = RotationStatus::iteration_cap;
  res.diagnostic = "iteration cap reached without meeting the threshold";
  for (int k = 1; k <= cfg.max_iterations; ++k) {
    const std::size_t idx = static_cast<std::size_t>(k - 1);
    double vk = 0.0;
    if (idx < cfg.v.size())
      vk = cfg.v[idx];
    else if (idx < default_shares.size())
      vk = 0.5 * default_shares[idx];

    const Basis search = search_fn(gamma, eps);
    if (search.empty()) {
      res.diagnostic = "search space exhausted before meeting the threshold";
      break;
    }
    AnnealConfig ac = cfg.annealer;
    ac.seed = derive_seed(cfg.annealer.seed, static_cast<std::uint64_t>(k));
    Vector g;
    try {
      g = optimize_vector(search, w, z, centred, vk, gamma, ac);
    } catch (const InfeasibleConstraint& e) {
      res.status = RotationStatus::infeasible_v;
      res.diagnostic = "v_" + std::to_string(k) + " = " + std::to_string(e.requested()) +
                       " exceeds the attainable share " + std::to_string(e.achievable());
      break;
    }
    res.v_used.push_back(vk);
    gamma = mark_orthonormal(gamma.concat(Basis(Matrix(g))), w);
    eps = residual_basis(centred, gamma, w).basis;
    const Basis full = complete_fn(gamma, eps);
    finalise(res, full, k, w, z, centred, cfg.v_tot);
    res.optimized_vectors = k;
    res.reconstruction_trace.push_back(reconstruction_error(full.leading(k), w, z));
    res.truncated_trace.push_back(res.truncated_error);
    if (res.truncated_error < cfg.threshold) {
      res.status = RotationStatus::converged;
      res.diagnostic.clear();
      break;
    }
  }
  res.rotation_defect = rotation_defect(span_basis, res.full_basis, w);
  if (res.rotation_defect > 1e-6)
    res.diagnostic += (res.diagnostic.empty() ? "" : "; ") +
                      std::string("rotated basis deviates from a rotation of the initial basis");
  return res;
}

}  // namespace

RotationResult optimal_rotation(const Matrix& centred, const WeightMatrix& w,
                                const Vector& z_anomaly, const RotationConfig& cfg,
                                const Basis& initial) {
  if (initial.length() != w.dim()) throw DimensionMismatch("optimal_rotation: basis length mismatch");
  const auto search = [](const Basis&, const Basis& eps) { return eps; };
  const auto complete = [&w](const Basis& gamma, const Basis& eps) {
    return mark_orthonormal(gamma.concat(eps), w);
  };
  return run_rotation(centred, w, z_anomaly, cfg, initial, shares(initial, w, centred), initial,
                      search, complete);
}

RotationResult rotation_with_physical_vectors(const Matrix& centred, const WeightMatrix& w,
                                              const Vector& z_anomaly, const RotationConfig& cfg,
                                              const Basis& physical) {
  const WsvdResult svd = wsvd(centred, w);
  if (physical.empty()) return optimal_rotation(centred, w, z_anomaly, cfg, svd.basis);
  if (physical.length() != w.dim())
    throw DimensionMismatch("rotation_with_physical_vectors: physical basis length mismatch");
  for (Index k = 0; k < physical.size(); ++k)
    if (!(physical.col(k).norm() > 0.0))
      throw DomainError("physical vector " + std::to_string(k) + " is zero");
  const Basis span = gram_schmidt_w(physical.concat(svd.basis), w).basis;
  const auto search = [&](const Basis& gamma, const Basis& eps) {
    const Basis work = gram_schmidt_w(gamma.concat(physical).concat(eps), w).basis;
    return work.trailing(std::min(gamma.size(), work.size()));
  };
  const auto complete = [&](const Basis& gamma, const Basis& eps) {
    return gram_schmidt_w(gamma.concat(eps).concat(physical), w).basis;
  };
  return run_rotation(centred, w, z_anomaly, cfg, span, shares(svd.basis, w, centred), svd.basis,
                      search, complete);
}

}  // namespace calibasis
