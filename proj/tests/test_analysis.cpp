#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mvsim/analysis.hpp"

using namespace mvsim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> grid(double t0, double t1, double dt) {
    std::vector<double> t;
    for (double v = t0; v <= t1 + 1e-12; v += dt) t.push_back(v);
    return t;
}

std::vector<double> map_exp(const std::vector<double>& t, double a, double rate) {
    std::vector<double> v;
    for (double x : t) v.push_back(a * std::exp(rate * x));
    return v;
}

}  // namespace

TEST_CASE("log-linear regression recovers exact exponential decay") {
    const auto t = grid(0.0, 2.0, 0.1);
    const auto v = map_exp(t, 5.0, -2.0);
    const StabilityReport rep = estimate_rate(t, v, 0.0, 2.0);
    CHECK_THAT(rep.empirical_rate, WithinAbs(-2.0, 1e-12));
    CHECK_THAT(rep.empirical_decay_rate(), WithinAbs(2.0, 1e-12));
    CHECK_THAT(rep.r_squared, WithinAbs(1.0, 1e-12));
    CHECK_THAT(rep.slope_stderr, WithinAbs(0.0, 1e-7));
    CHECK(rep.window_start == 0.0);
    CHECK(rep.window_end == 2.0);
    CHECK(rep.statistic_kind == "mean_square");

    // Only points inside the window participate.
    auto noisy_tail = v;
    noisy_tail.back() = 1e9;
    const StabilityReport inner = estimate_rate(t, noisy_tail, 0.0, 1.5);
    CHECK_THAT(inner.empirical_rate, WithinAbs(-2.0, 1e-12));
}

TEST_CASE("rate estimation rejects unusable windows") {
    const auto t = grid(0.0, 2.0, 0.1);
    const auto v = map_exp(t, 5.0, -2.0);
    CHECK_THROWS_AS(estimate_rate(t, v, 0.0, 0.85), std::invalid_argument);  // 9 points
    CHECK_THROWS_AS(estimate_rate(t, v, 1.5, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(estimate_rate(t, {1.0, 2.0}, 0.0, 2.0), std::invalid_argument);

    auto with_zero = v;
    with_zero[5] = 0.0;
    CHECK_THROWS_AS(estimate_rate(t, with_zero, 0.0, 2.0), std::invalid_argument);
    auto with_nan = v;
    with_nan[5] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(estimate_rate(t, with_nan, 0.0, 2.0), std::invalid_argument);
    // The bad point sits outside the window: fine.
    CHECK_NOTHROW(estimate_rate(t, with_zero, 0.6, 2.0));
}

TEST_CASE("per-path slopes summarize the ensemble") {
    const auto t = grid(0.0, 1.0, 0.05);
    const std::vector<std::vector<double>> rows{
        map_exp(t, 2.0, -1.0), map_exp(t, 10.0, -3.0), map_exp(t, 1.0, 0.5)};
    const PathRateSummary s = estimate_path_rates(t, rows, 0.0, 1.0);
    REQUIRE(s.slopes.size() == 3);
    CHECK_THAT(s.median, WithinAbs(-1.0, 1e-12));
    CHECK_THAT(s.min, WithinAbs(-3.0, 1e-12));
    CHECK_THAT(s.max, WithinAbs(0.5, 1e-12));
    CHECK(s.negative_count == 2);
    CHECK_THROWS_AS(estimate_path_rates(t, {}, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("explicit mean-square rate equation") {
    // Reference constants a1 = 5, a2 = 1, b1 = 7, b2 = 2.
    CHECK_THAT(ms_max_stepsize(5.0, 1.0, 7.0, 2.0), WithinAbs(4.0 / 9.0, 1e-14));
    CHECK_THAT(ms_max_stepsize(5.0, 1.0, 0.0, 0.0), WithinAbs(0.25, 1e-14));
    CHECK_THROWS_AS(ms_max_stepsize(1.0, 1.0, 7.0, 2.0), std::invalid_argument);

    const MsRate r = ms_rate_equation(0.005, 5.0, 1.0, 7.0, 2.0);
    CHECK_THAT(r.theta_star, WithinAbs(3.99463, 1e-4));
    CHECK_THAT(std::log(r.lambda_star), WithinRel(r.theta_star, 1e-12));

    // Independent root-finding route to the same lambda*.
    CHECK_THAT(ms_lambda_by_bisection(0.005, 5.0, 1.0, 7.0, 2.0),
               WithinRel(r.lambda_star, 1e-10));

    // The rate climbs to a1 - a2 = 4 as the stepsize shrinks.
    CHECK(ms_rate_equation(0.1, 5.0, 1.0, 7.0, 2.0).theta_star < r.theta_star);
    CHECK(r.theta_star < 4.0);
    CHECK_THAT(ms_rate_equation(1e-6, 5.0, 1.0, 7.0, 2.0).theta_star, WithinAbs(4.0, 1e-4));

    // Stepsizes beyond the admissible bound are rejected.
    CHECK_THROWS_AS(ms_rate_equation(0.45, 5.0, 1.0, 7.0, 2.0), std::invalid_argument);
    CHECK(ms_rate_equation(0.44, 5.0, 1.0, 7.0, 2.0).theta_star > 0.0);
}

TEST_CASE("explicit almost-sure rate equation") {
    // Reference constants b1 = 7, b2 = 2, c1 = 5, c2 = 1.
    const double d0 = as_max_stepsize(7.0, 2.0, 5.0, 1.0);
    CHECK_THAT(d0, WithinAbs(0.1472970472, 1e-9));
    // The bound is the smallest positive root of the monotonicity cubic.
    auto cubic = [](double x) {
        return 98.0 * x * x * x - 122.0 * x * x + 43.0 * x - 4.0;
    };
    CHECK_THAT(cubic(d0), WithinAbs(0.0, 1e-8));
    CHECK(d0 < 5.0 / 7.0);
    CHECK_THROWS_AS(as_max_stepsize(7.0, 2.0, 1.0, 1.0), std::invalid_argument);

    const AsRate r5 = as_rate_equation(0.005, 7.0, 2.0, 5.0, 1.0);
    const AsRate r10 = as_rate_equation(0.01, 7.0, 2.0, 5.0, 1.0);
    CHECK_THAT(r5.xi_star, WithinAbs(3.99195584, 1e-6));
    CHECK_THAT(r10.xi_star, WithinAbs(3.98277870, 1e-6));
    CHECK(r10.xi_star < r5.xi_star);
    CHECK_THAT(as_rate_equation(1e-6, 7.0, 2.0, 5.0, 1.0).xi_star, WithinAbs(4.0, 1e-4));

    CHECK_THAT(as_vartheta_by_bisection(0.005, 7.0, 5.0),
               WithinRel(r5.vartheta_star, 1e-10));

    CHECK_THROWS_AS(as_rate_equation(0.15, 7.0, 2.0, 5.0, 1.0), std::invalid_argument);
    CHECK(as_rate_equation(0.145, 7.0, 2.0, 5.0, 1.0).xi_star > 0.0);
}

TEST_CASE("backward almost-sure rate equation") {
    // Linear-model constants ct1 = 6, ct2 = 1, h1 = 2, h2 = 1/2.
    const BemRate r = bem_rate_equation(0.01, 6.0, 1.0, 2.0, 0.5);
    CHECK_THAT(r.beta_star, WithinAbs(2.5196995, 1e-6));
    CHECK_THAT(std::log(r.eta_star), WithinAbs(4.0821995, 1e-6));
    CHECK_THAT(bem_eta_by_bisection(0.01, 6.0, 2.0), WithinRel(r.eta_star, 1e-10));

    // Delta -> 0 limit: (ct1 - h1) - (ct2 + h2).
    CHECK_THAT(bem_rate_equation(1e-6, 7.0, 1.0, 0.0, 2.0).beta_star, WithinAbs(4.0, 1e-4));

    // Unlike the explicit scheme, any stepsize with a positive bracket works.
    CHECK(bem_rate_equation(0.2, 6.0, 1.0, 2.0, 0.5).beta_star > 0.0);
    CHECK_THROWS_AS(bem_rate_equation(0.3, 6.0, 1.0, 2.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(bem_rate_equation(0.01, 3.0, 1.0, 2.0, 0.5), std::invalid_argument);

    CHECK(bem_ms_rate(4.0, 1.0, 0.25) == 2.5);
    CHECK_THROWS_AS(bem_ms_rate(1.4, 1.0, 0.2), std::invalid_argument);
}

TEST_CASE("particle-limit rate function branches in the dimension") {
    CHECK_THAT(phi_of_n(1.0, 1, kInf), WithinAbs(2.0, 1e-15));
    CHECK_THAT(phi_of_n(100.0, 3, kInf), WithinAbs(0.11, 1e-12));
    CHECK_THAT(phi_of_n(4.0, 1, kInf), WithinAbs(0.75, 1e-15));
    CHECK_THAT(phi_of_n(100.0, 3, 3.0), WithinAbs(0.1 + 0.215443469003188, 1e-12));
    // d = 4 carries the logarithmic correction.
    CHECK_THAT(phi_of_n(100.0, 4, 3.0),
               WithinAbs(0.1 * std::log(101.0) + 0.215443469003188, 1e-12));
    // d = 5 switches to the N^{-2/d} branch.
    CHECK_THAT(phi_of_n(32.0, 5, 3.0), WithinAbs(0.25 + 0.314980262473718, 1e-12));

    CHECK(std::isfinite(phi_of_n(1e6, 4, kInf)));
    CHECK(phi_of_n(200.0, 1, kInf) < phi_of_n(100.0, 1, kInf));

    // Excluded and ill-posed parameter pairs.
    CHECK_THROWS_AS(phi_of_n(10.0, 4, 4.0), std::invalid_argument);
    CHECK_THROWS_AS(phi_of_n(10.0, 2, 4.0), std::invalid_argument);
    CHECK_NOTHROW(phi_of_n(10.0, 5, 4.0));
    CHECK_THROWS_AS(phi_of_n(10.0, 3, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(phi_of_n(0.5, 3, 3.0), std::invalid_argument);
    CHECK_THROWS_AS(phi_of_n(10.0, 0, 3.0), std::invalid_argument);
}

TEST_CASE("signed chaos exponents") {
    CHECK(chaos_exponent(1, kInf) == -0.5);
    CHECK(chaos_exponent(4, kInf) == -0.5);
    CHECK_THAT(chaos_exponent(6, kInf), WithinAbs(-1.0 / 3.0, 1e-15));
    CHECK(chaos_exponent(8, kInf) == -0.25);
    CHECK_THAT(chaos_exponent(3, 3.0), WithinAbs(-1.0 / 3.0, 1e-15));
    CHECK_THAT(chaos_exponent(5, 2.5), WithinAbs(-0.2, 1e-15));
}

TEST_CASE("log-log chaos fit on synthetic power laws") {
    const std::vector<double> n{8.0, 16.0, 32.0, 64.0, 128.0};
    std::vector<double> e;
    for (double v : n) e.push_back(3.0 * std::pow(v, -0.5));

    const ChaosReport rep = fit_chaos_rate(n, e);
    CHECK_THAT(rep.slope, WithinAbs(-0.5, 1e-12));
    CHECK_THAT(rep.intercept, WithinAbs(std::log(3.0), 1e-12));
    CHECK_THAT(rep.r_squared, WithinAbs(1.0, 1e-12));
    CHECK_THAT(rep.slope_stderr, WithinAbs(0.0, 1e-7));
    CHECK(rep.theoretical_exponent == -0.5);
    CHECK(rep.q_used == kInf);

    // The slope is invariant under rescaling of the error.
    std::vector<double> e10 = e;
    for (double& v : e10) v *= 10.0;
    CHECK_THAT(fit_chaos_rate(n, e10).slope, WithinAbs(-0.5, 1e-12));

    CHECK_THROWS_AS(fit_chaos_rate({8.0, 8.0, 16.0, 32.0}, {1.0, 1.0, 0.5, 0.25}),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_chaos_rate(n, {1.0, 0.5, 0.0, 0.1, 0.1}), std::invalid_argument);
    CHECK_THROWS_AS(fit_chaos_rate({0.5, 8.0, 16.0, 32.0}, {1.0, 1.0, 0.5, 0.25}),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_chaos_rate(n, {1.0, 0.5}), std::invalid_argument);
}
