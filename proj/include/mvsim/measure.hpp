#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mvsim/reduce.hpp"

namespace mvsim {

// The N x d state array at one time step. Equal-weight atoms of the
// empirical measure mu^{X,N} = (1/N) sum_i delta_{x_i}.
struct ParticleCloud {
    std::size_t n = 0;
    std::size_t d = 1;
    std::int64_t step = 0;
    double time = 0.0;
    bool diverged = false;
    std::vector<double> atoms;  // n*d, row-major

    ParticleCloud() = default;
    ParticleCloud(std::size_t n_, std::size_t d_)
        : n(n_), d(d_), atoms(n_ * d_, 0.0) {}

    double* atom(std::size_t i) { return atoms.data() + i * d; }
    const double* atom(std::size_t i) const { return atoms.data() + i * d; }
};

namespace detail {
inline void require_live(const ParticleCloud& c, const char* op) {
    if (c.n == 0) throw std::invalid_argument(std::string(op) + ": empty cloud");
    if (c.diverged) throw std::invalid_argument(std::string(op) + ": cloud is flagged diverged");
}
}  // namespace detail

// Read-only functionals over a particle array; the discrete surrogate for
// mu_t^{X,N} handed to the coefficient functions. The mean is computed once
// at construction (every preset reads it each evaluation), heavier
// functionals are on demand. Purely a view: no atom data is copied.
class MeasureView {
public:
    MeasureView(const double* atoms, std::size_t n, std::size_t d)
        : atoms_(atoms), n_(n), d_(d), mean_(d, 0.0) {
        for (std::size_t c = 0; c < d_; ++c)
            mean_[c] = pairwise_sum_indexed(0, n_, [&](std::size_t i) {
                           return atoms_[i * d_ + c];
                       }) /
                       double(n_);
    }
    explicit MeasureView(const ParticleCloud& cloud)
        : MeasureView(cloud.atoms.data(), cloud.n, cloud.d) {}

    std::size_t size() const { return n_; }
    std::size_t dim() const { return d_; }
    const double* atom(std::size_t i) const { return atoms_ + i * d_; }
    const double* mean() const { return mean_.data(); }
    double mean1() const { return mean_[0]; }

    // W_2(mu, delta_0) = (int |x|^2 mu(dx))^{1/2}
    double w2_to_delta0() const { return std::sqrt(raw_moment(2.0)); }

    // (1/N) sum |x_i|^p
    double raw_moment(double p) const {
        return pairwise_sum_indexed(0, n_, [&](std::size_t i) {
                   double sq = 0.0;
                   for (std::size_t c = 0; c < d_; ++c) {
                       const double v = atoms_[i * d_ + c];
                       sq += v * v;
                   }
                   return p == 2.0 ? sq : std::pow(sq, 0.5 * p);
               }) /
               double(n_);
    }

private:
    const double* atoms_;
    std::size_t n_, d_;
    std::vector<double> mean_;
};

// ---- cloud-level operations ----

inline std::vector<double> mean(const ParticleCloud& cloud) {
    detail::require_live(cloud, "mean");
    MeasureView v(cloud);
    return std::vector<double>(v.mean(), v.mean() + cloud.d);
}

inline double raw_moment(const ParticleCloud& cloud, double p) {
    detail::require_live(cloud, "raw_moment");
    return MeasureView(cloud).raw_moment(p);
}

inline double w2_to_delta0(const ParticleCloud& cloud) {
    detail::require_live(cloud, "w2_to_delta0");
    return MeasureView(cloud).w2_to_delta0();
}

// Exact W_2 between two equal-size 1-d empirical measures: the monotone
// (sorted) coupling is optimal in one dimension.
inline double w2_1d(const ParticleCloud& a, const ParticleCloud& b) {
    detail::require_live(a, "w2_1d");
    detail::require_live(b, "w2_1d");
    if (a.d != 1 || b.d != 1) throw std::invalid_argument("w2_1d: requires d=1");
    if (a.n != b.n) throw std::invalid_argument("w2_1d: requires equal atom counts");
    std::vector<double> sa(a.atoms), sb(b.atoms);
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double total = pairwise_sum_indexed(0, a.n, [&](std::size_t i) {
        const double diff = sa[i] - sb[i];
        return diff * diff;
    });
    return std::sqrt(total / double(a.n));
}

namespace detail {

// Exact minimum-cost perfect matching on a dense square cost matrix via
// shortest augmenting paths with potentials (the Jonker-Volgenant /
// Hungarian family). O(n^3); used as an oracle, not on the hot path.
inline double lap_min_cost(const std::vector<double>& cost, std::size_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0);  // column -> row, 1-based, 0 = free
    std::vector<std::size_t> way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j) total += cost[(match[j] - 1) * n + (j - 1)];
    return total;
}

}  // namespace detail

// Exact W_2 in any dimension: with equal weights, optimal transport between
// the two clouds is an assignment problem on squared distances.
inline double w2_assignment(const ParticleCloud& a, const ParticleCloud& b) {
    detail::require_live(a, "w2_assignment");
    detail::require_live(b, "w2_assignment");
    if (a.n != b.n) throw std::invalid_argument("w2_assignment: requires equal atom counts");
    if (a.d != b.d) throw std::invalid_argument("w2_assignment: requires equal dimensions");
    const std::size_t n = a.n, d = a.d;
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double sq = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = a.atoms[i * d + c] - b.atoms[j * d + c];
                sq += diff * diff;
            }
            cost[i * n + j] = sq;
        }
    const double total = detail::lap_min_cost(cost, n);
    return std::sqrt(std::max(0.0, total) / double(n));
}

}  // namespace mvsim
