#ifndef PERMSAMP_EXACT_HPP
#define PERMSAMP_EXACT_HPP

#include "permsamp/matrix.hpp"

namespace permsamp {

// Sum over all n! permutations of prod_j A(j, sigma(j)). Exists as the
// oracle-of-the-oracle; guarded at n <= 9.
double permanent_brute_force(const NonNegativeMatrix& m);

// Ryser inclusion-exclusion with Gray-code column-sum updates, O(2^n * n).
// Guarded at n <= 30. Accumulates in long double.
double permanent_ryser(const NonNegativeMatrix& m);

// Product of per-block Ryser permanents for a matrix with exact
// BlockDiagonal(n,k) support. Throws NotBlockDiagonal otherwise;
// DimensionTooLarge if any block exceeds 30.
double permanent_block_diagonal(const NonNegativeMatrix& m, int block_size);

} // namespace permsamp

#endif
