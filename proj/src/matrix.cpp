#include "permsamp/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "permsamp/rng.hpp"

namespace permsamp {

NonNegativeMatrix::NonNegativeMatrix(int n, std::vector<double> entries)
    : n_(n), entries_(std::move(entries)) {
    if (n < 1) {
        throw InvalidArgs("matrix dimension must be >= 1, got " + std::to_string(n));
    }
    if (entries_.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
        throw NonSquare("expected " + std::to_string(n) + "x" + std::to_string(n) + " = " +
                        std::to_string(static_cast<std::size_t>(n) * n) + " entries, got " +
                        std::to_string(entries_.size()));
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const double v = entries_[i];
        if (!std::isfinite(v)) {
            throw NegativeEntry("entry " + std::to_string(i) + " is not finite");
        }
        if (v < 0.0) {
            throw NegativeEntry("entry " + std::to_string(i) + " is negative: " + std::to_string(v));
        }
    }
}

NonNegativeMatrix NonNegativeMatrix::identity(int n) {
    std::vector<double> e(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) e[static_cast<std::size_t>(i) * n + i] = 1.0;
    return NonNegativeMatrix(n, std::move(e));
}

NonNegativeMatrix NonNegativeMatrix::all_ones(int n) {
    return NonNegativeMatrix(n, std::vector<double>(static_cast<std::size_t>(n) * n, 1.0));
}

NonNegativeMatrix NonNegativeMatrix::zero(int n) {
    return NonNegativeMatrix(n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0));
}

double NonNegativeMatrix::log_permutation_weight(const std::vector<int>& col_to_row) const {
    double lw = 0.0;
    for (int c = 0; c < n_; ++c) {
        const double a = (*this)(col_to_row[c], c);
        if (a == 0.0) return -std::numeric_limits<double>::infinity();
        lw += std::log(a);
    }
    return lw;
}

NonNegativeMatrix generate(const GeneratorSpec& spec) {
    if (spec.n < 1) throw InvalidArgs("generator: n must be >= 1");
    const int n = spec.n;
    Rng rng(spec.seed);
    std::vector<double> e(static_cast<std::size_t>(n) * n, 0.0);
    switch (spec.kind) {
    case GeneratorKind::Uniform:
        for (auto& v : e) v = uniform01(rng);
        break;
    case GeneratorKind::BlockDiagonal: {
        const int k = spec.block_size;
        if (k < 1 || k > n) throw InvalidArgs("generator: block size must satisfy 1 <= k <= n");
        for (int start = 0; start < n; start += k) {
            const int b = std::min(k, n - start);
            for (int i = 0; i < b; ++i)
                for (int j = 0; j < b; ++j)
                    e[static_cast<std::size_t>(start + i) * n + (start + j)] = uniform01(rng);
        }
        break;
    }
    }
    return NonNegativeMatrix(n, std::move(e));
}

bool has_block_diagonal_support(const NonNegativeMatrix& m, int block_size) {
    // Block b covers indices [b*k, min((b+1)*k, n)); entry (i,j) may be
    // nonzero only when i and j fall in the same block.
    const int n = m.n();
    const int k = block_size;
    if (k < 1 || k > n) return false;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (m(i, j) != 0.0 && i / k != j / k) return false;
    return true;
}

} // namespace permsamp
