#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mvsim/model.hpp"

using namespace mvsim;
using Catch::Matchers::WithinAbs;

namespace {

// One-atom surrogate measure delta_{v}.
struct Delta {
    double v;
    MeasureView view() const { return MeasureView(&v, 1, 1); }
};

double drift_at(const ModelSpec& m, double x, double atom) {
    const Delta d{atom};
    const MeasureView mu = d.view();
    double out;
    m.drift(&x, mu, nullptr, &out);
    return out;
}

double diffusion_at(const ModelSpec& m, double x, double atom) {
    const Delta d{atom};
    const MeasureView mu = d.view();
    double out;
    m.diffusion(&x, mu, &out);
    return out;
}

double jacobian_at(const ModelSpec& m, double x, double atom) {
    const Delta d{atom};
    const MeasureView mu = d.view();
    double out;
    m.drift_jacobian(&x, mu, &out);
    return out;
}

}  // namespace

TEST_CASE("opinion preset coefficients by hand") {
    const ModelSpec m = preset_opinion(1.0, 2.5, 1.0);
    CHECK(m.name == "opinion");
    CHECK(m.d == 1);
    CHECK(m.m == 1);
    CHECK_THAT(drift_at(m, 1.0, 2.0), WithinAbs(-1.5, 1e-15));
    CHECK_THAT(drift_at(m, 0.0, 2.0), WithinAbs(2.0, 1e-15));
    CHECK_THAT(diffusion_at(m, 1.5, 0.0), WithinAbs(1.5, 1e-15));
    CHECK_THAT(jacobian_at(m, 3.0, 2.0), WithinAbs(-3.5, 1e-15));

    CHECK(m.init_mean == 2.0);
    CHECK(m.init_std == 1.0);
    CHECK(m.mean_ode_rate.has_value());
    CHECK(*m.mean_ode_rate == -2.5);
    CHECK_FALSE(m.uses_observation);

    // The reference parameters carry the full declared constant set.
    CHECK(m.constants.K1 == 5.0);
    CHECK(m.constants.K2 == 1.0);
    CHECK(m.constants.a1 == 5.0);
    CHECK(m.constants.a2 == 1.0);
    CHECK(m.constants.q == 2.0);
    CHECK(m.constants.b1 == 7.0);
    CHECK(m.constants.b2 == 2.0);
    CHECK(m.constants.c1 == 5.0);
    CHECK(m.constants.c2 == 1.0);
    CHECK_FALSE(m.constants.l1.has_value());
    CHECK_FALSE(m.constants.C0.has_value());
}

TEST_CASE("opinion constants are declared only at the reference parameters") {
    const ModelSpec m = preset_opinion(2.0, 2.5, 1.0);
    CHECK_FALSE(m.constants.a1.has_value());
    CHECK_FALSE(m.constants.K1.has_value());
    CHECK(*m.mean_ode_rate == -2.5);
    const ModelSpec g = preset_opinion(1.0, 4.0, 1.0);
    CHECK_FALSE(g.constants.a1.has_value());
    CHECK(*g.mean_ode_rate == -4.0);
}

TEST_CASE("linear preset coefficients and constants") {
    const ModelSpec m = preset_linear();
    CHECK_THAT(drift_at(m, 1.0, 2.0), WithinAbs(-1.5, 1e-15));
    CHECK_THAT(diffusion_at(m, 1.0, 2.0), WithinAbs(2.0, 1e-15));
    CHECK_THAT(jacobian_at(m, -4.0, 1.0), WithinAbs(-3.5, 1e-15));

    CHECK(m.constants.K1 == 4.0);
    CHECK(m.constants.K2 == 1.5);
    CHECK(m.constants.a1 == 4.0);
    CHECK(m.constants.a2 == 1.5);
    CHECK(m.constants.b1 == 24.5);
    CHECK(m.constants.b2 == 2.0);
    CHECK(m.constants.c1 == 4.0);
    CHECK(m.constants.c2 == 1.5);
    CHECK(m.constants.l1 == 4.0);
    CHECK(m.constants.l2 == 1.0);
    CHECK(m.constants.d2 == 0.25);
    CHECK(m.constants.p0 == 3.0);
    CHECK(m.constants.ct1 == 6.0);
    CHECK(m.constants.ct2 == 1.0);
    CHECK(m.constants.h1 == 2.0);
    CHECK(m.constants.h2 == 0.5);
    CHECK_FALSE(m.constants.C0.has_value());
    CHECK(*m.mean_ode_rate == -2.5);
    m.constants.validate();
}

TEST_CASE("feedback preset reads the frozen observation") {
    const ModelSpec m = preset_feedback(7.0, 8.0, 0.05);
    CHECK(m.uses_observation);
    CHECK(m.obs_gap.has_value());
    CHECK(*m.obs_gap == 0.05);
    CHECK_FALSE(m.mean_ode_rate.has_value());

    const Delta d{2.0};
    const MeasureView mu = d.view();
    const double state_obs = 2.0, mean_obs = 3.0;
    ObsView ov;
    ov.state = &state_obs;
    ov.mean = &mean_obs;
    double x = 1.0, out;
    m.drift(&x, mu, &ov, &out);
    CHECK_THAT(out, WithinAbs(2.0 * 1.0 + 2.0 - 7.0 * 2.0 - 8.0 * 3.0, 1e-15));

    // The control is undefined without a snapshot.
    CHECK_THROWS_AS(m.drift(&x, mu, nullptr, &out), std::invalid_argument);

    CHECK_THAT(diffusion_at(m, -2.5, 0.0), WithinAbs(-2.5, 1e-15));
    CHECK_THROWS_AS(preset_feedback(1.0, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(preset_feedback(1.0, 1.0, -0.05), std::invalid_argument);
}

TEST_CASE("cubic preset coefficients by hand") {
    const ModelSpec m = preset_cubic(0.0, 1.0);
    CHECK_THAT(drift_at(m, 1.0, 0.0), WithinAbs(-6.0, 1e-15));
    CHECK_THAT(drift_at(m, -2.0, 0.0), WithinAbs(16.0 + 8.0, 1e-15));
    const double half_pi = std::acos(0.0);
    CHECK_THAT(drift_at(m, 1.0, half_pi), WithinAbs(-5.0, 1e-15));
    CHECK_THAT(diffusion_at(m, 2.0, 0.0), WithinAbs(4.0, 1e-15));
    CHECK_THAT(diffusion_at(m, 2.0, half_pi), WithinAbs(5.0, 1e-15));

    const ModelSpec lin = preset_cubic(1.5, 0.0);
    CHECK_THAT(diffusion_at(lin, 2.0, half_pi), WithinAbs(4.0, 1e-15));

    // The drift Jacobian is uniformly dissipative: -6x^2 - 4 <= -4.
    for (double x = -3.0; x <= 3.0; x += 0.25) {
        CHECK_THAT(jacobian_at(m, x, 0.5), WithinAbs(-6.0 * x * x - 4.0, 1e-12));
        CHECK(jacobian_at(m, x, 0.5) <= -4.0);
    }

    CHECK(m.init_mean == 0.0);
    CHECK(m.init_std == 2.0);
    CHECK_FALSE(m.mean_ode_rate.has_value());
}

TEST_CASE("cubic constants depend on the diffusion shape") {
    const ModelSpec quad = preset_cubic(0.0, 1.0);
    CHECK(quad.constants.ct1 == 7.0);
    CHECK(quad.constants.ct2 == 1.0);
    CHECK(quad.constants.C0 == 2.0);
    CHECK(quad.constants.q == 2.0);
    CHECK(quad.constants.K1 == 7.0);
    CHECK(quad.constants.a1 == 7.0);
    CHECK(quad.constants.c1 == 7.0);
    CHECK(quad.constants.c2 == 3.0);
    // Superlinear diffusion admits no linear growth pair.
    CHECK_FALSE(quad.constants.h1.has_value());
    CHECK_FALSE(quad.constants.b1.has_value());

    const ModelSpec lin = preset_cubic(1.0, 0.0);
    CHECK(lin.constants.h1 == 2.0);
    CHECK(lin.constants.h2 == 2.0);
    CHECK(lin.constants.K1 == 5.0);
    CHECK(lin.constants.a1 == 5.0);
    CHECK(lin.constants.c1 == 5.0);

    // Too much multiplicative noise: the dissipative margin 7 - 2*rho1^2
    // closes and the combined constants disappear.
    const ModelSpec noisy = preset_cubic(2.0, 0.0);
    CHECK(noisy.constants.h1 == 8.0);
    CHECK_FALSE(noisy.constants.K1.has_value());
    CHECK_FALSE(noisy.constants.a1.has_value());
}

TEST_CASE("zero model is inert and fully declared at zero") {
    const ModelSpec m = zero_model();
    CHECK(drift_at(m, 3.0, 5.0) == 0.0);
    CHECK(diffusion_at(m, 3.0, 5.0) == 0.0);
    CHECK(m.constants.a1 == 0.0);
    CHECK(m.constants.a2 == 0.0);
    CHECK(m.constants.b1 == 0.0);
    CHECK(m.constants.C0 == 0.0);
    CHECK(*m.mean_ode_rate == 0.0);
}

TEST_CASE("make_preset resolves names, defaults and overrides") {
    const ModelSpec def = make_preset("opinion");
    CHECK(def.params.at("f") == 1.0);
    CHECK(def.params.at("g") == 2.5);
    CHECK(def.params.at("sigma") == 1.0);
    CHECK(def.constants.a1.has_value());

    const ModelSpec fast = make_preset("opinion", {{"g", 4.0}});
    CHECK(fast.params.at("g") == 4.0);
    CHECK_FALSE(fast.constants.a1.has_value());

    const ModelSpec cub = make_preset("cubic");
    CHECK(cub.params.at("rho1") == 0.0);
    CHECK(cub.params.at("rho2") == 1.0);

    const ModelSpec fb = make_preset("feedback");
    CHECK(fb.params.at("delta_obs") == 0.05);
    CHECK(fb.params.at("k1") == 0.0);

    CHECK(make_preset("linear").name == "linear");
    CHECK(make_preset("zero").name == "zero");

    CHECK_THROWS_AS(make_preset("heston"), std::invalid_argument);
    CHECK_THROWS_AS(make_preset("opinion", {{"gamma", 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(make_preset("linear", {{"f", 1.0}}), std::invalid_argument);
    CHECK_THROWS_WITH(make_preset("opinion", {{"gamma", 1.0}}),
                      Catch::Matchers::ContainsSubstring("gamma"));
}

TEST_CASE("constant bundles are validated") {
    RateConstants rc;
    rc.validate();  // all-unset is fine
    rc.a1 = -1.0;
    CHECK_THROWS_AS(rc.validate(), std::invalid_argument);
    rc.a1 = 1.0;
    rc.q = 1.5;
    CHECK_THROWS_AS(rc.validate(), std::invalid_argument);
    rc.q = 2.0;
    rc.p0 = 2.0;
    CHECK_THROWS_AS(rc.validate(), std::invalid_argument);
    rc.p0 = 3.0;
    rc.validate();
}
