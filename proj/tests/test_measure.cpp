#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "mvsim/measure.hpp"
#include "mvsim/reduce.hpp"
#include "mvsim/rng.hpp"

using namespace mvsim;
using Catch::Matchers::WithinAbs;

namespace {

ParticleCloud cloud1d(std::vector<double> atoms) {
    ParticleCloud c(atoms.size(), 1);
    c.atoms = std::move(atoms);
    return c;
}

ParticleCloud random_cloud(std::size_t n, std::size_t d, std::uint32_t tag) {
    ParticleCloud c(n, d);
    for (std::size_t i = 0; i < n * d; ++i)
        c.atoms[i] = 3.0 * gaussian({77u, tag, std::uint32_t(i), 0u, 0u});
    return c;
}

}  // namespace

TEST_CASE("moments of small clouds by hand") {
    const ParticleCloud c = cloud1d({1.0, 2.0, 3.0, 4.0});
    const MeasureView mu(c);
    CHECK(mu.size() == 4);
    CHECK(mu.dim() == 1);
    CHECK_THAT(mu.mean1(), WithinAbs(2.5, 1e-15));
    CHECK_THAT(mu.raw_moment(2.0), WithinAbs(7.5, 1e-15));
    CHECK_THAT(mu.raw_moment(3.0), WithinAbs(25.0, 1e-13));
    CHECK_THAT(mean(c)[0], WithinAbs(2.5, 1e-15));
    CHECK_THAT(raw_moment(c, 2.0), WithinAbs(7.5, 1e-15));

    CHECK_THAT(w2_to_delta0(cloud1d({3.0, 4.0})), WithinAbs(std::sqrt(12.5), 1e-15));

    // d = 2: the norm enters the moment, per-coordinate averages the mean.
    ParticleCloud c2(2, 2);
    c2.atoms = {1.0, 2.0, 3.0, 4.0};
    const MeasureView mu2(c2);
    CHECK_THAT(mu2.mean()[0], WithinAbs(2.0, 1e-15));
    CHECK_THAT(mu2.mean()[1], WithinAbs(3.0, 1e-15));
    CHECK_THAT(mu2.raw_moment(2.0), WithinAbs(15.0, 1e-15));
    CHECK_THAT(mu2.raw_moment(4.0), WithinAbs((25.0 + 625.0) / 2.0, 1e-12));
}

TEST_CASE("1-d Wasserstein distance uses the sorted coupling") {
    const ParticleCloud a = cloud1d({0.0, 2.0});
    const ParticleCloud b = cloud1d({1.0, 5.0});
    CHECK_THAT(w2_1d(a, b), WithinAbs(std::sqrt(5.0), 1e-15));

    // Atom order is irrelevant: the measure is the multiset.
    const ParticleCloud a_swapped = cloud1d({2.0, 0.0});
    const ParticleCloud b_swapped = cloud1d({5.0, 1.0});
    CHECK(w2_1d(a_swapped, b_swapped) == w2_1d(a, b));
    CHECK(w2_1d(b, a) == w2_1d(a, b));

    CHECK(w2_1d(a, a) == 0.0);
    CHECK(w2_1d(cloud1d({0.0, 1.0}), cloud1d({1.0, 0.0})) == 0.0);

    CHECK_THROWS_AS(w2_1d(a, cloud1d({1.0, 2.0, 3.0})), std::invalid_argument);
    ParticleCloud two_d(2, 2);
    CHECK_THROWS_AS(w2_1d(two_d, two_d), std::invalid_argument);
}

TEST_CASE("assignment solver agrees with the sorted coupling in one dimension") {
    for (std::uint32_t trial = 0; trial < 25; ++trial) {
        const std::size_t n = 1 + (trial * 7) % 40;
        const ParticleCloud a = random_cloud(n, 1, 2 * trial);
        const ParticleCloud b = random_cloud(n, 1, 2 * trial + 1);
        CHECK_THAT(w2_assignment(a, b), WithinAbs(w2_1d(a, b), 1e-10));
    }
}

TEST_CASE("assignment solver on hand-checkable configurations") {
    // Two copies of the origin against {-1, +1}: every matching costs 1.
    CHECK_THAT(w2_assignment(cloud1d({0.0, 0.0}), cloud1d({1.0, -1.0})),
               WithinAbs(1.0, 1e-14));

    // A rigid translation in d = 2 is matched atom-to-atom.
    const std::size_t n = 12;
    ParticleCloud a = random_cloud(n, 2, 900);
    ParticleCloud b = a;
    for (std::size_t i = 0; i < n; ++i) {
        b.atom(i)[0] += 0.7;
        b.atom(i)[1] -= 1.1;
    }
    CHECK_THAT(w2_assignment(a, b), WithinAbs(std::sqrt(0.7 * 0.7 + 1.1 * 1.1), 1e-12));

    // Identical clouds with permuted atoms are the same measure.
    ParticleCloud p = a;
    for (std::size_t i = 0; i + 1 < n; i += 2)
        for (std::size_t c = 0; c < 2; ++c)
            std::swap(p.atom(i)[c], p.atom(i + 1)[c]);
    CHECK_THAT(w2_assignment(a, p), WithinAbs(0.0, 1e-12));

    // The mean displacement is a lower bound for W2.
    const double dm = std::hypot(mean(a)[0] - mean(b)[0], mean(a)[1] - mean(b)[1]);
    CHECK(w2_assignment(a, b) >= dm - 1e-12);
}

TEST_CASE("degenerate clouds are rejected") {
    ParticleCloud empty;
    CHECK_THROWS_AS(mean(empty), std::invalid_argument);
    CHECK_THROWS_AS(raw_moment(empty, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(w2_to_delta0(empty), std::invalid_argument);

    ParticleCloud blown = cloud1d({1.0, 2.0});
    blown.diverged = true;
    CHECK_THROWS_AS(mean(blown), std::invalid_argument);
    CHECK_THROWS_AS(w2_1d(blown, blown), std::invalid_argument);
    CHECK_THROWS_AS(w2_assignment(blown, blown), std::invalid_argument);
}

TEST_CASE("pairwise reduction matches a plain fold and is topology-stable") {
    std::vector<double> v(5000);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = gaussian({5u, 0u, std::uint32_t(i), 0u, 0u});
    const double plain = std::accumulate(v.begin(), v.end(), 0.0);
    const double tree = pairwise_sum(v.data(), v.size());
    CHECK_THAT(tree, WithinAbs(plain, 1e-9 * (1.0 + std::fabs(plain))));

    // Same data, same topology: the sum is bitwise reproducible.
    CHECK(pairwise_sum(v.data(), v.size()) == tree);

    // The indexed form sums arbitrary terms.
    const double squares = pairwise_sum_indexed(0, 101, [](std::size_t i) {
        return double(i) * double(i);
    });
    CHECK(squares == 100.0 * 101.0 * 201.0 / 6.0);
}
