#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mvsim/rng.hpp"

using namespace mvsim;
using Catch::Matchers::WithinAbs;

namespace {

// Independent CDF route: Phi via the standard library's erfc.
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("philox4x32-10 matches the published test vectors") {
    // Known-answer vectors for the 10-round philox4x32 configuration
    // (all-zeros, all-ones, and the pi-digits counter/key).
    auto r0 = detail::philox4x32({0u, 0u, 0u, 0u}, {0u, 0u});
    CHECK(r0[0] == 0x6627e8d5u);
    CHECK(r0[1] == 0xe169c58du);
    CHECK(r0[2] == 0xbc57ac4cu);
    CHECK(r0[3] == 0x9b00dbd8u);

    auto r1 = detail::philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                 {0xffffffffu, 0xffffffffu});
    CHECK(r1[0] == 0x408f276du);
    CHECK(r1[1] == 0x41c83b0eu);
    CHECK(r1[2] == 0xa20bc7c6u);
    CHECK(r1[3] == 0x6d5451fdu);

    auto r2 = detail::philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                 {0xa4093822u, 0x299f31d0u});
    CHECK(r2[0] == 0xd16cfe09u);
    CHECK(r2[1] == 0x94fdccebu);
    CHECK(r2[2] == 0x5001e420u);
    CHECK(r2[3] == 0x24126ea1u);
}

TEST_CASE("uniform mapping stays inside [0, 1] and keeps 53-bit resolution") {
    CHECK(detail::to_uniform01(0u, 0u) == 0.5 / 9007199254740992.0);
    CHECK(detail::to_uniform01(0u, 0u) > 0.0);
    CHECK(detail::to_uniform01(0xffffffffu, 0xffffffffu) <= 1.0);
    CHECK(detail::to_uniform01(0xffffffffu, 0xffffffffu) > 0.999999999999999);
}

TEST_CASE("inverse normal cdf inverts the erfc cdf") {
    CHECK(detail::inverse_normal_cdf(0.5) == 0.0);
    CHECK_THAT(detail::inverse_normal_cdf(0.975), WithinAbs(1.959963984540054, 1e-12));
    CHECK_THAT(detail::inverse_normal_cdf(0.025), WithinAbs(-1.959963984540054, 1e-12));
    for (double p : {1e-6, 1e-3, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999, 1.0 - 1e-6}) {
        const double x = detail::inverse_normal_cdf(p);
        CHECK_THAT(normal_cdf(x), WithinAbs(p, 1e-12));
    }
    // Degenerate uniforms saturate instead of producing inf or NaN.
    CHECK(detail::inverse_normal_cdf(1.0) == 38.5);
    CHECK(detail::inverse_normal_cdf(0.0) == -38.5);
}

TEST_CASE("gaussian is a pure function of its key") {
    const NoiseKey key{42u, 3u, 7u, 11u, 1u};
    const double v = gaussian(key);
    CHECK(gaussian(key) == v);
    CHECK(std::isfinite(v));

    // Every field of the key addresses a distinct variate.
    CHECK(gaussian({43u, 3u, 7u, 11u, 1u}) != v);
    CHECK(gaussian({42u, 4u, 7u, 11u, 1u}) != v);
    CHECK(gaussian({42u, 3u, 8u, 11u, 1u}) != v);
    CHECK(gaussian({42u, 3u, 7u, 12u, 1u}) != v);
    CHECK(gaussian({42u, 3u, 7u, 11u, 2u}) != v);

    // The high seed half participates too.
    CHECK(gaussian({42u + (1ull << 32), 3u, 7u, 11u, 1u}) != v);
}

TEST_CASE("gaussian draws pass a Kolmogorov-Smirnov test at alpha = 0.001") {
    const std::size_t n = 100000;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = gaussian({2024u, 0u, std::uint32_t(i), 0u, 0u});
    std::sort(x.begin(), x.end());

    double d = 0.0;
    double sum = 0.0, sums = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = normal_cdf(x[i]);
        d = std::max(d, std::max(f - double(i) / double(n), double(i + 1) / double(n) - f));
        sum += x[i];
        sums += x[i] * x[i];
    }
    // K-S critical value sqrt(-log(alpha/2)/2)/sqrt(n) at alpha = 0.001.
    const double crit = std::sqrt(-std::log(0.0005) / 2.0) / std::sqrt(double(n));
    CHECK(d < crit);

    const double mean = sum / double(n);
    const double var = sums / double(n) - mean * mean;
    CHECK_THAT(mean, WithinAbs(0.0, 4.0 / std::sqrt(double(n))));
    CHECK_THAT(var, WithinAbs(1.0, 4.0 * std::sqrt(2.0 / double(n))));
}

TEST_CASE("brownian increments scale gaussians by sqrt(dt)") {
    const double dt = 0.0625;  // exact square root
    double out[3];
    brownian_increment(9u, 1u, 2u, 3u, 3, dt, out);
    for (int c = 0; c < 3; ++c)
        CHECK(out[c] == 0.25 * gaussian({9u, 1u, 2u, 3u, std::uint32_t(c)}));

    CHECK_THROWS_AS(brownian_increment(9u, 1u, 2u, 3u, 3, 0.0, out), std::invalid_argument);
    CHECK_THROWS_AS(brownian_increment(9u, 1u, 2u, 3u, 3, -0.1, out), std::invalid_argument);
}

TEST_CASE("brownian increments have the right first two moments") {
    const std::size_t n = 100000;
    const double dt = 0.01;
    double sum = 0.0, sums = 0.0;
    double w;
    for (std::size_t i = 0; i < n; ++i) {
        brownian_increment(7u, 0u, std::uint32_t(i), 5u, 1, dt, &w);
        sum += w;
        sums += w * w;
    }
    const double mean = sum / double(n);
    const double var = sums / double(n) - mean * mean;
    CHECK_THAT(mean, WithinAbs(0.0, 4.0 * std::sqrt(dt / double(n))));
    CHECK_THAT(var, WithinAbs(dt, 4.0 * dt * std::sqrt(2.0 / double(n))));
}

TEST_CASE("initial samples are affine in the gaussian and never alias increments") {
    double x[2];
    initial_sample(11u, 4u, 9u, 2, 2.0, 3.0, x);
    for (int c = 0; c < 2; ++c)
        CHECK(x[c] == 2.0 + 3.0 * gaussian({11u, 4u, 9u, kInitialDrawStep, std::uint32_t(c)}));

    // Deterministic initial condition: std = 0 is exact, no residual noise.
    initial_sample(11u, 4u, 9u, 2, -1.5, 0.0, x);
    CHECK(x[0] == -1.5);
    CHECK(x[1] == -1.5);

    CHECK_THROWS_AS(initial_sample(11u, 4u, 9u, 2, 0.0, -1.0, x), std::invalid_argument);

    // The reserved step index keeps X_0 out of the Brownian key space.
    CHECK(gaussian({11u, 4u, 9u, kInitialDrawStep, 0u}) != gaussian({11u, 4u, 9u, 0u, 0u}));

    const std::size_t n = 100000;
    double sum = 0.0, sums = 0.0, v;
    for (std::size_t i = 0; i < n; ++i) {
        initial_sample(3u, 0u, std::uint32_t(i), 1, 2.0, 0.5, &v);
        sum += v;
        sums += v * v;
    }
    const double mean = sum / double(n);
    const double sd = std::sqrt(sums / double(n) - mean * mean);
    CHECK_THAT(mean, WithinAbs(2.0, 4.0 * 0.5 / std::sqrt(double(n))));
    CHECK_THAT(sd, WithinAbs(0.5, 0.01));
}
