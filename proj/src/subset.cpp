#include "permsamp/subset.hpp"

#include <cmath>
#include <limits>

#include "permsamp/errors.hpp"

namespace permsamp {

PermutationSubset PermutationSubset::full(int n) {
    PermutationSubset s;
    s.free_rows.resize(n);
    s.free_cols.resize(n);
    for (int i = 0; i < n; ++i) {
        s.free_rows[i] = i;
        s.free_cols[i] = i;
    }
    return s;
}

PermutationSubset PermutationSubset::child(const NonNegativeMatrix& m, int col, int row) const {
    PermutationSubset c;
    c.fixed = fixed;
    c.fixed.emplace_back(col, row);
    c.free_rows.reserve(free_rows.size() - 1);
    c.free_cols.reserve(free_cols.size() - 1);
    for (const int r : free_rows)
        if (r != row) c.free_rows.push_back(r);
    for (const int cc : free_cols)
        if (cc != col) c.free_cols.push_back(cc);
    if (c.free_rows.size() != free_rows.size() - 1 || c.free_cols.size() != free_cols.size() - 1) {
        throw InvalidArgs("child: column or row is not free");
    }
    const double a = m(row, col);
    c.log_prefix_weight =
        (a == 0.0 || log_prefix_weight == -std::numeric_limits<double>::infinity())
            ? -std::numeric_limits<double>::infinity()
            : log_prefix_weight + std::log(a);
    return c;
}

std::vector<int> PermutationSubset::singleton_permutation(int n) const {
    if (!is_singleton()) throw InvalidArgs("singleton_permutation on a non-singleton subset");
    std::vector<int> perm(n, -1);
    for (const auto& [col, row] : fixed) perm[col] = row;
    if (free_cols.size() == 1) perm[free_cols[0]] = free_rows[0];
    return perm;
}

} // namespace permsamp
