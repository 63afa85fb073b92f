#ifndef PERMSAMP_SUBSET_HPP
#define PERMSAMP_SUBSET_HPP

#include <utility>
#include <vector>

#include "permsamp/matrix.hpp"

namespace permsamp {

// A set of permutations identified by a prefix of fixed column->row
// assignments: { sigma : sigma^{-1}(col) = row for all (col,row) in fixed }.
// free_rows / free_cols are the complements, kept sorted ascending.
struct PermutationSubset {
    std::vector<std::pair<int, int>> fixed; // (column, row) pairs, insertion order
    std::vector<int> free_rows;
    std::vector<int> free_cols;
    double log_prefix_weight = 0.0; // sum of log A(row,col) over fixed; -inf if any factor is 0

    // The whole state space of n! permutations.
    static PermutationSubset full(int n);

    // The subset obtained by additionally fixing sigma^{-1}(col) = row.
    // col and row must be free.
    PermutationSubset child(const NonNegativeMatrix& m, int col, int row) const;

    // A subset with <= 1 free column denotes exactly one permutation.
    bool is_singleton() const { return free_cols.size() <= 1; }

    int free_count() const { return static_cast<int>(free_cols.size()); }

    // The unique permutation (column -> row) denoted by a singleton subset.
    std::vector<int> singleton_permutation(int n) const;
};

} // namespace permsamp

#endif
