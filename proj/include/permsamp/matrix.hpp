#ifndef PERMSAMP_MATRIX_HPP
#define PERMSAMP_MATRIX_HPP

#include <cstdint>
#include <vector>

#include "permsamp/errors.hpp"

namespace permsamp {

// Dense n x n matrix with non-negative, finite entries, row-major storage.
// Immutable after construction; the weight of a permutation sigma is
// prod_j A(j, sigma(j)) and the permanent is the sum of those weights.
class NonNegativeMatrix {
public:
    // Validates squareness, finiteness and non-negativity.
    NonNegativeMatrix(int n, std::vector<double> entries);

    static NonNegativeMatrix identity(int n);
    static NonNegativeMatrix all_ones(int n);
    static NonNegativeMatrix zero(int n);

    int n() const { return n_; }
    double operator()(int row, int col) const { return entries_[static_cast<std::size_t>(row) * n_ + col]; }
    const std::vector<double>& entries() const { return entries_; }

    // Weight of a column->row assignment: prod_c A(perm[c], c), in log space
    // (-inf when any factor is zero). perm must be a bijection.
    double log_permutation_weight(const std::vector<int>& col_to_row) const;

private:
    int n_;
    std::vector<double> entries_;
};

enum class GeneratorKind { Uniform, BlockDiagonal };

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::Uniform;
    int n = 1;
    int block_size = 1; // BlockDiagonal only; must satisfy 1 <= k <= n
    std::uint64_t seed = 0;
};

// Uniform: every entry i.i.d. uniform on [0,1) from the seeded stream, filled
// row-major. BlockDiagonal: floor(n/k) dense k x k uniform blocks plus one
// (n mod k) block along the diagonal, zeros elsewhere. Deterministic per seed.
NonNegativeMatrix generate(const GeneratorSpec& spec);

// True iff the support of m is contained in the BlockDiagonal(n,k) layout.
bool has_block_diagonal_support(const NonNegativeMatrix& m, int block_size);

} // namespace permsamp

#endif
