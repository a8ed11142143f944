#include "calibasis/design.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "calibasis/error.hpp"
#include "calibasis/rng.hpp"

namespace calibasis {

double min_pairwise_distance(const Matrix& x) {
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < i; ++j) best = std::min(best, (x.row(i) - x.row(j)).squaredNorm());
  return std::sqrt(best);
}

Matrix maximin_lhs(Index n, Index p, std::uint64_t seed, int restarts) {
  if (n < 1 || p < 1) throw DomainError("maximin_lhs: n and p must be >= 1");
  if (restarts < 1) throw DomainError("maximin_lhs: restarts must be >= 1");
  Rng rng(seed);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  Matrix best;
  double best_crit = -1.0;
  Matrix x(n, p);
  for (int r = 0; r < restarts; ++r) {
    for (Index d = 0; d < p; ++d) {
      std::iota(perm.begin(), perm.end(), Index{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      for (Index i = 0; i < n; ++i)
        x(i, d) = -1.0 + (2.0 * static_cast<double>(perm[static_cast<std::size_t>(i)]) + 1.0) /
                             static_cast<double>(n);
    }
    const double crit = n > 1 ? min_pairwise_distance(x) : 0.0;
    if (crit > best_crit) {
      best_crit = crit;
      best = x;
    }
  }
  return best;
}

Matrix maximin_subset(const Matrix& candidates, Index n, std::uint64_t seed) {
  const Index m = candidates.rows();
  if (n < 1 || n > m) throw DomainError("maximin_subset: need 1 <= n <= number of candidates");
  Rng rng(seed);
  std::uniform_int_distribution<Index> pick(0, m - 1);
  std::vector<double> dist(static_cast<std::size_t>(m), std::numeric_limits<double>::infinity());
  std::vector<char> used(static_cast<std::size_t>(m), 0);
  Matrix out(n, candidates.cols());
  Index next = pick(rng);
  for (Index k = 0; k < n; ++k) {
    out.row(k) = candidates.row(next);
    used[static_cast<std::size_t>(next)] = 1;
    Index far = -1;
    double far_d = -1.0;
    for (Index i = 0; i < m; ++i) {
      auto& d = dist[static_cast<std::size_t>(i)];
      d = std::min(d, (candidates.row(i) - candidates.row(next)).squaredNorm());
      if (!used[static_cast<std::size_t>(i)] && d > far_d) {
        far_d = d;
        far = i;
      }
    }
    next = far;
  }
  return out;
}

Matrix uniform_samples(Index count, Index inputs, std::uint64_t seed) {
  if (count < 0 || inputs <= 0) throw DomainError("uniform_samples: invalid sizes");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Matrix s(count, inputs);
  for (Index i = 0; i < count; ++i)
    for (Index d = 0; d < inputs; ++d) s(i, d) = unif(rng);
  return s;
}

}  // namespace calibasis
