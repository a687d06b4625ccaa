#pragma once

#include <cstddef>

namespace mvsim {

// Deterministic pairwise (tree) summation.
//
// All statistics in the engine funnel through this reduction. The tree
// topology depends only on the element count (fixed block size, halving by
// whole blocks), never on scheduling or worker count, so every run of the
// same experiment produces bit-identical sums. It also carries much better
// rounding behaviour than a naive left fold on long series.
inline constexpr std::size_t kReduceBlockSize = 256;

template <class Term>
double pairwise_sum_indexed(std::size_t lo, std::size_t hi, const Term& term) {
    const std::size_t n = hi - lo;
    if (n <= kReduceBlockSize) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += term(i);
        return s;
    }
    const std::size_t blocks = (n + kReduceBlockSize - 1) / kReduceBlockSize;
    const std::size_t mid = lo + (blocks / 2) * kReduceBlockSize;
    return pairwise_sum_indexed(lo, mid, term) + pairwise_sum_indexed(mid, hi, term);
}

inline double pairwise_sum(const double* x, std::size_t n) {
    return pairwise_sum_indexed(0, n, [x](std::size_t i) { return x[i]; });
}

}  // namespace mvsim
