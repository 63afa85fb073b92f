#include "permsamp/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>

#include "permsamp/exact.hpp"

namespace permsamp {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

DeltaTable::DeltaTable(int max_k) : max_k_(max_k) {
    if (max_k < 1) throw InvalidArgs("DeltaTable needs max_k >= 1");
    gamma_.resize(max_k + 1);
    delta_.resize(max_k + 1);
    gamma_[0] = 0.0;
    delta_[0] = 0.0;
    for (int k = 1; k <= max_k; ++k) {
        gamma_[k] = std::exp(std::lgamma(static_cast<double>(k) + 1.0) / k);
        delta_[k] = gamma_[k] - gamma_[k - 1];
    }
}

std::shared_ptr<const DeltaTable> DeltaTable::shared(int min_k) {
    static std::mutex mu;
    static std::shared_ptr<const DeltaTable> table;
    std::lock_guard lock(mu);
    if (!table || table->max_k() < min_k) {
        table = std::make_shared<const DeltaTable>(std::max(min_k, table ? 2 * table->max_k() : min_k));
    }
    return table;
}

SubsetBound soules_upper_bound(const NonNegativeMatrix& m, std::span<const int> active_rows,
                               std::span<const int> active_cols) {
    if (active_rows.size() != active_cols.size()) {
        throw InvalidArgs("soules_upper_bound: row set size " + std::to_string(active_rows.size()) +
                          " != column set size " + std::to_string(active_cols.size()));
    }
    const int r = static_cast<int>(active_rows.size());
    if (r == 0) return {0.0, true};

    const auto table = DeltaTable::shared(r);
    std::vector<double> vals(r);
    double log_prod = 0.0;
    for (const int row : active_rows) {
        for (int j = 0; j < r; ++j) vals[j] = m(row, active_cols[j]);
        std::sort(vals.begin(), vals.end(), std::greater<>());
        double term = 0.0;
        for (int j = 0; j < r; ++j) term += vals[j] * table->delta(j + 1);
        if (term == 0.0) return {kNegInf, r == 1};
        log_prod += std::log(term);
    }
    return {log_prod, r == 1};
}

SubsetBound subset_upper_bound(const NonNegativeMatrix& m, const PermutationSubset& subset) {
    if (subset.log_prefix_weight == kNegInf) return {kNegInf, subset.is_singleton()};
    SubsetBound b = soules_upper_bound(m, subset.free_rows, subset.free_cols);
    b.log_value += subset.log_prefix_weight;
    b.is_tight_singleton = subset.is_singleton();
    return b;
}

bool upper_bound_exceeds_permanent_check(const NonNegativeMatrix& m) {
    if (m.n() > 8) throw DimensionTooLarge("upper_bound_exceeds_permanent_check limited to n <= 8");
    std::vector<int> all(m.n());
    for (int i = 0; i < m.n(); ++i) all[i] = i;
    const double bound = std::exp(soules_upper_bound(m, all, all).log_value);
    const double per = permanent_brute_force(m);
    return bound >= per - 1e-9 * per;
}

} // namespace permsamp
