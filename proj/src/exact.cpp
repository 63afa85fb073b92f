#include "permsamp/exact.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <string>
#include <vector>

namespace permsamp {

double permanent_brute_force(const NonNegativeMatrix& m) {
    const int n = m.n();
    if (n > 9) throw DimensionTooLarge("brute-force permanent limited to n <= 9, got n = " + std::to_string(n));

    std::vector<int> cols(n);
    for (int i = 0; i < n; ++i) cols[i] = i;

    long double sum = 0.0L;
    do {
        long double prod = 1.0L;
        for (int row = 0; row < n; ++row) {
            prod *= m(row, cols[row]);
            if (prod == 0.0L) break;
        }
        sum += prod;
    } while (std::next_permutation(cols.begin(), cols.end()));
    return static_cast<double>(sum);
}

double permanent_ryser(const NonNegativeMatrix& m) {
    const int n = m.n();
    if (n > 30) throw DimensionTooLarge("Ryser permanent limited to n <= 30, got n = " + std::to_string(n));

    // per(A) = sum over nonempty column subsets S of (-1)^(n-|S|) prod_i rowsum_i(S),
    // visiting subsets in Gray-code order so each step updates one column.
    std::vector<long double> row_sums(n, 0.0L);
    long double sum = 0.0L;
    std::uint64_t prev_gray = 0;
    const std::uint64_t total = 1ULL << n;
    for (std::uint64_t k = 1; k < total; ++k) {
        const std::uint64_t gray = k ^ (k >> 1);
        const std::uint64_t diff = gray ^ prev_gray;
        const int col = std::countr_zero(diff);
        if (gray & diff) {
            for (int i = 0; i < n; ++i) row_sums[i] += m(i, col);
        } else {
            for (int i = 0; i < n; ++i) row_sums[i] -= m(i, col);
        }
        prev_gray = gray;

        long double prod = 1.0L;
        for (int i = 0; i < n; ++i) {
            prod *= row_sums[i];
            if (prod == 0.0L) break;
        }
        const int ones = std::popcount(gray);
        sum += ((n - ones) & 1) ? -prod : prod;
    }
    return static_cast<double>(sum);
}

double permanent_block_diagonal(const NonNegativeMatrix& m, int block_size) {
    const int n = m.n();
    const int k = block_size;
    if (k < 1 || k > n) throw InvalidArgs("block size must satisfy 1 <= k <= n");
    if (!has_block_diagonal_support(m, k)) {
        throw NotBlockDiagonal("matrix support does not match the BlockDiagonal(n=" + std::to_string(n) +
                               ", k=" + std::to_string(k) + ") layout");
    }
    double prod = 1.0;
    for (int start = 0; start < n; start += k) {
        const int b = std::min(k, n - start);
        if (b > 30) throw DimensionTooLarge("block of size " + std::to_string(b) + " exceeds the Ryser guard of 30");
        std::vector<double> block(static_cast<std::size_t>(b) * b);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < b; ++j)
                block[static_cast<std::size_t>(i) * b + j] = m(start + i, start + j);
        prod *= permanent_ryser(NonNegativeMatrix(b, std::move(block)));
    }
    return prod;
}

} // namespace permsamp
