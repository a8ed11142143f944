#pragma once

#include <cstdint>

#include "calibasis/types.hpp"

namespace calibasis {

// Smallest pairwise Euclidean distance between rows.
double min_pairwise_distance(const Matrix& x);

// Latin hypercube on [-1, 1]^p with points at stratum midpoints, keeping the
// best of `restarts` random permutations under the maximin criterion.
Matrix maximin_lhs(Index n, Index p, std::uint64_t seed, int restarts = 100);

// Greedy maximin subset of n rows of candidates: start from a seeded random
// row, then repeatedly add the row farthest from the chosen set.
Matrix maximin_subset(const Matrix& candidates, Index n, std::uint64_t seed);

// Uniform samples over [-1, 1]^p, generated sequentially from the seed.
Matrix uniform_samples(Index count, Index inputs, std::uint64_t seed);

}  // namespace calibasis
