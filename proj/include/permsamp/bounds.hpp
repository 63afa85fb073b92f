#ifndef PERMSAMP_BOUNDS_HPP
#define PERMSAMP_BOUNDS_HPP

#include <memory>
#include <span>
#include <vector>

#include "permsamp/matrix.hpp"
#include "permsamp/subset.hpp"

namespace permsamp {

// gamma(k) = (k!)^(1/k) with gamma(0) = 0, and delta(k) = gamma(k) - gamma(k-1).
// delta(1) = 1 and delta is strictly positive and non-increasing; prefix sums
// of delta telescope back to gamma. gamma is computed via lgamma so large k
// never overflows.
class DeltaTable {
public:
    explicit DeltaTable(int max_k);

    int max_k() const { return max_k_; }
    double gamma(int k) const { return gamma_[k]; }
    double delta(int k) const { return delta_[k]; }
    std::span<const double> deltas() const { return delta_; }

    // Process-wide table covering at least min_k, grown on demand and shared.
    static std::shared_ptr<const DeltaTable> shared(int min_k);

private:
    int max_k_;
    std::vector<double> gamma_; // index 0..max_k
    std::vector<double> delta_; // index 0..max_k, delta_[0] = 0
};

// Log-space upper bound on the weight sum of a permutation subset.
// log_value = -inf iff the bound is exactly zero.
struct SubsetBound {
    double log_value = 0.0;
    bool is_tight_singleton = false;
};

// Row-sorted product bound on the permanent of the active submatrix:
// log prod_i sum_j a*_ij delta(j) with each active row sorted descending.
// Returns log 1 = 0 for empty row/col sets and -inf when an active row is all
// zeros. On 0/1 matrices this equals the product of (r_i!)^(1/r_i) over row
// degrees r_i. Throws InvalidArgs when |rows| != |cols| (SizeMismatch).
SubsetBound soules_upper_bound(const NonNegativeMatrix& m, std::span<const int> active_rows,
                               std::span<const int> active_cols);

// log(prefix weight) + soules_upper_bound on the free rows/columns; -inf if
// the prefix weight is 0. Tight (equal to the permutation weight) on
// singletons.
SubsetBound subset_upper_bound(const NonNegativeMatrix& m, const PermutationSubset& subset);

// Test support: true iff exp(soules bound) >= brute-force permanent up to
// 1e-9 relative slack. Requires n <= 8.
bool upper_bound_exceeds_permanent_check(const NonNegativeMatrix& m);

} // namespace permsamp

#endif
