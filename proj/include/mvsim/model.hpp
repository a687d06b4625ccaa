#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsim/measure.hpp"

namespace mvsim {

// Constants of the structural assumptions a model may satisfy. Every field
// is optional: a model declares only the inequalities it actually meets.
//   K1, K2          pairwise monotonicity (well-posedness)
//   a1, a2, q       dissipativity with q-th moment weight
//   b1, b2          drift linear growth
//   c1, c2          dissipativity weighted by the Brownian dimension
//   C0              bound on |b(0,mu)| + ||sigma(0,mu)||
//   l1, l2, d2, p0  split-diffusion dissipativity, sigma = sigma1 + sigma2
//   ct1, ct2        drift-only dissipativity
//   h1, h2          diffusion growth weighted by the Brownian dimension
struct RateConstants {
    std::optional<double> K1, K2;
    std::optional<double> a1, a2, q;
    std::optional<double> b1, b2;
    std::optional<double> c1, c2;
    std::optional<double> C0;
    std::optional<double> l1, l2, d2, p0;
    std::optional<double> ct1, ct2, h1, h2;

    void validate() const {
        auto nonneg = [](const std::optional<double>& v, const char* name) {
            if (v && !(*v >= 0.0))
                throw std::invalid_argument(std::string("RateConstants: ") + name +
                                            " must be nonnegative");
        };
        nonneg(K1, "K1"); nonneg(K2, "K2");
        nonneg(a1, "a1"); nonneg(a2, "a2");
        nonneg(b1, "b1"); nonneg(b2, "b2");
        nonneg(c1, "c1"); nonneg(c2, "c2");
        nonneg(C0, "C0");
        nonneg(l1, "l1"); nonneg(l2, "l2"); nonneg(d2, "d2");
        nonneg(ct1, "ct1"); nonneg(ct2, "ct2");
        nonneg(h1, "h1"); nonneg(h2, "h2");
        if (q && !(*q >= 2.0)) throw std::invalid_argument("RateConstants: q must be >= 2");
        if (p0 && !(*p0 >= 3.0)) throw std::invalid_argument("RateConstants: p0 must be >= 3");
    }
};

// Last observed ensemble state for discrete-time feedback controls: the
// per-particle states and their average, frozen at the most recent
// observation time (a multiple of the observation gap).
struct ObservationSnapshot {
    std::vector<double> state_obs;  // n*d, row-major
    std::vector<double> mean_obs;   // d
    double obs_time = 0.0;
};

// Per-particle slice of a snapshot handed to the drift.
struct ObsView {
    const double* state = nullptr;  // this particle's last observed state, d
    const double* mean = nullptr;   // ensemble average at observation time, d
    double time = 0.0;
};

// A model is its coefficient pair plus dimensions, declared constants and
// initial law. Coefficients must be deterministic and side-effect free;
// instances are immutable after construction and shareable across threads.
struct ModelSpec {
    std::string name;
    std::size_t d = 1;
    std::size_t m = 1;

    // out has size d. obs is null unless uses_observation.
    std::function<void(const double* x, const MeasureView& mu, const ObsView* obs,
                       double* out)>
        drift;
    // out has size d*m, row-major.
    std::function<void(const double* x, const MeasureView& mu, double* out)> diffusion;
    // Jacobian of the drift in the state argument only; out has size d*d.
    std::function<void(const double* x, const MeasureView& mu, double* out)> drift_jacobian;

    RateConstants constants;
    double init_mean = 0.0;
    double init_std = 1.0;

    bool uses_observation = false;
    std::optional<double> obs_gap;  // observation gap delta, when used

    // Exact decay rate of the mean ODE d/dt E[X] = rate * E[X], for models
    // whose mean equation is closed and linear. Used as a coupling reference.
    std::optional<double> mean_ode_rate;

    // Preset parameters, recorded for config echo in output headers.
    std::map<std::string, double> params;
};

// Opinion dynamics with a stubborn source: attraction to the running mean
// plus a restoring force, multiplicative noise.
//   b(x, mu) = f*(mean(mu) - x) - g*x,  sigma(x, mu) = s*x
// Assumption constants are declared only for the reference parameters
// (f, g, s) = (1, 5/2, 1), the configuration whose rates are known.
inline ModelSpec preset_opinion(double f, double g, double s) {
    ModelSpec spec;
    spec.name = "opinion";
    spec.drift = [f, g](const double* x, const MeasureView& mu, const ObsView*,
                        double* out) { out[0] = f * (mu.mean1() - x[0]) - g * x[0]; };
    spec.diffusion = [s](const double* x, const MeasureView&, double* out) {
        out[0] = s * x[0];
    };
    spec.drift_jacobian = [f, g](const double*, const MeasureView&, double* out) {
        out[0] = -(f + g);
    };
    if (f == 1.0 && g == 2.5 && s == 1.0) {
        spec.constants.K1 = 5.0;
        spec.constants.K2 = 1.0;
        spec.constants.a1 = 5.0;
        spec.constants.a2 = 1.0;
        spec.constants.q = 2.0;
        spec.constants.b1 = 7.0;
        spec.constants.b2 = 2.0;
        spec.constants.c1 = 5.0;
        spec.constants.c2 = 1.0;
    }
    spec.init_mean = 2.0;
    spec.init_std = 1.0;
    spec.mean_ode_rate = -g;
    spec.params = {{"f", f}, {"g", g}, {"sigma", s}};
    return spec;
}

// Linear mean-field model with measure-dependent diffusion:
//   b(x, mu) = -3.5x + mean(mu),  sigma(x, mu) = x + 0.5*mean(mu)
inline ModelSpec preset_linear() {
    ModelSpec spec;
    spec.name = "linear";
    spec.drift = [](const double* x, const MeasureView& mu, const ObsView*, double* out) {
        out[0] = -3.5 * x[0] + mu.mean1();
    };
    spec.diffusion = [](const double* x, const MeasureView& mu, double* out) {
        out[0] = x[0] + 0.5 * mu.mean1();
    };
    spec.drift_jacobian = [](const double*, const MeasureView&, double* out) {
        out[0] = -3.5;
    };
    // Tightest integer-ish constants these coefficients admit. With
    // u = x - y and w the mean gap (|w| <= W2), the pairwise form is
    // -6u^2 + 3uw + 0.25w^2 <= -4u^2 + 1.5w^2 since 2u^2 - 3uw + 1.25w^2
    // has negative discriminant. The single-state forms coincide.
    spec.constants.K1 = 4.0;
    spec.constants.K2 = 1.5;
    spec.constants.a1 = 4.0;
    spec.constants.a2 = 1.5;
    spec.constants.q = 2.0;
    spec.constants.b1 = 24.5;
    spec.constants.b2 = 2.0;
    spec.constants.c1 = 4.0;
    spec.constants.c2 = 1.5;
    // Split sigma1(x) = x, sigma2(mu) = 0.5*mean(mu).
    spec.constants.l1 = 4.0;
    spec.constants.l2 = 1.0;
    spec.constants.d2 = 0.25;
    spec.constants.p0 = 3.0;
    spec.constants.ct1 = 6.0;
    spec.constants.ct2 = 1.0;
    spec.constants.h1 = 2.0;
    spec.constants.h2 = 0.5;
    spec.init_mean = 2.0;
    spec.init_std = 1.0;
    spec.mean_ode_rate = -2.5;
    return spec;
}

// Unstable linear model with a discrete-time observation feedback control:
//   b(x, mu, obs) = 2x + mean(mu) - k1*state_obs - k2*mean_obs
//   sigma(x, mu)  = x
// With k1 = k2 = 0 this is the uncontrolled blow-up model.
inline ModelSpec preset_feedback(double k1, double k2, double delta_obs) {
    if (!(delta_obs > 0.0))
        throw std::invalid_argument("preset_feedback: delta_obs must be positive");
    ModelSpec spec;
    spec.name = "feedback";
    spec.drift = [k1, k2](const double* x, const MeasureView& mu, const ObsView* obs,
                          double* out) {
        if (obs == nullptr)
            throw std::invalid_argument("feedback drift requires an observation snapshot");
        out[0] = 2.0 * x[0] + mu.mean1() - k1 * obs->state[0] - k2 * obs->mean[0];
    };
    spec.diffusion = [](const double* x, const MeasureView&, double* out) { out[0] = x[0]; };
    spec.drift_jacobian = [](const double*, const MeasureView&, double* out) {
        out[0] = 2.0;
    };
    spec.init_mean = 2.0;
    spec.init_std = 1.0;
    spec.uses_observation = true;
    spec.obs_gap = delta_obs;
    spec.params = {{"k1", k1}, {"k2", k2}, {"delta_obs", delta_obs}};
    return spec;
}

// Cubic drift with superlinear diffusion options:
//   b(x, mu)     = -2x^3 - 4x + sin(mean(mu))
//   sigma(x, mu) = rho1*x + rho2*x^2 + sin(mean(mu))
inline ModelSpec preset_cubic(double rho1, double rho2) {
    ModelSpec spec;
    spec.name = "cubic";
    spec.drift = [](const double* x, const MeasureView& mu, const ObsView*, double* out) {
        out[0] = -2.0 * x[0] * x[0] * x[0] - 4.0 * x[0] + std::sin(mu.mean1());
    };
    spec.diffusion = [rho1, rho2](const double* x, const MeasureView& mu, double* out) {
        out[0] = rho1 * x[0] + rho2 * x[0] * x[0] + std::sin(mu.mean1());
    };
    spec.drift_jacobian = [](const double* x, const MeasureView&, double* out) {
        out[0] = -6.0 * x[0] * x[0] - 4.0;
    };
    // Drift-only dissipativity holds for every (rho1, rho2):
    // 2x*b <= -4x^4 - 7x^2 + sin(mean)^2 <= -7x^2 + W2^2. The origin bound
    // is |sin| + |sin| <= 2.
    spec.constants.ct1 = 7.0;
    spec.constants.ct2 = 1.0;
    spec.constants.C0 = 2.0;
    spec.constants.q = 2.0;
    if (rho2 == 0.0) {
        // sigma is linear: ||sigma||^2 <= 2*rho1^2 x^2 + 2 W2^2, and the
        // combined dissipative forms keep -(7 - 2*rho1^2) x^2 when positive.
        spec.constants.h1 = 2.0 * rho1 * rho1;
        spec.constants.h2 = 2.0;
        if (7.0 - 2.0 * rho1 * rho1 > 0.0) {
            spec.constants.K1 = 7.0 - 2.0 * rho1 * rho1;
            spec.constants.K2 = 3.0;
            spec.constants.a1 = 7.0 - 2.0 * rho1 * rho1;
            spec.constants.a2 = 3.0;
            spec.constants.c1 = 7.0 - 2.0 * rho1 * rho1;
            spec.constants.c2 = 3.0;
        }
    } else if (rho1 == 0.0 && rho2 == 1.0) {
        // The x^2 diffusion term is absorbed by the -2x^3 drift term:
        // (x+y)^2 <= 2(x^2 + xy + y^2) gives the exact cancellation.
        spec.constants.K1 = 7.0;
        spec.constants.K2 = 3.0;
        spec.constants.a1 = 7.0;
        spec.constants.a2 = 3.0;
        spec.constants.c1 = 7.0;
        spec.constants.c2 = 3.0;
    }
    spec.init_mean = 0.0;
    spec.init_std = 2.0;
    spec.params = {{"rho1", rho1}, {"rho2", rho2}};
    return spec;
}

// Null dynamics, handy as a fixture: every scheme step is the identity.
inline ModelSpec zero_model() {
    ModelSpec spec;
    spec.name = "zero";
    spec.drift = [](const double*, const MeasureView&, const ObsView*, double* out) {
        out[0] = 0.0;
    };
    spec.diffusion = [](const double*, const MeasureView&, double* out) { out[0] = 0.0; };
    spec.drift_jacobian = [](const double*, const MeasureView&, double* out) {
        out[0] = 0.0;
    };
    spec.constants.K1 = 0.0;
    spec.constants.K2 = 0.0;
    spec.constants.a1 = 0.0;
    spec.constants.a2 = 0.0;
    spec.constants.q = 2.0;
    spec.constants.b1 = 0.0;
    spec.constants.b2 = 0.0;
    spec.constants.C0 = 0.0;
    spec.init_mean = 0.0;
    spec.init_std = 1.0;
    spec.mean_ode_rate = 0.0;
    return spec;
}

// Build a preset by name with parameter overrides, the hook the config file
// uses. Unknown names and unknown parameter keys are rejected.
inline ModelSpec make_preset(const std::string& name,
                             const std::map<std::string, double>& params = {}) {
    auto get = [&](const char* key, double fallback) {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    auto reject_unknown = [&](std::initializer_list<const char*> known) {
        for (const auto& [key, value] : params) {
            (void)value;
            bool ok = false;
            for (const char* k : known)
                if (key == k) ok = true;
            if (!ok)
                throw std::invalid_argument("make_preset: unknown parameter '" + key +
                                            "' for model '" + name + "'");
        }
    };
    if (name == "opinion") {
        reject_unknown({"f", "g", "sigma"});
        return preset_opinion(get("f", 1.0), get("g", 2.5), get("sigma", 1.0));
    }
    if (name == "linear") {
        reject_unknown({});
        return preset_linear();
    }
    if (name == "feedback") {
        reject_unknown({"k1", "k2", "delta_obs"});
        return preset_feedback(get("k1", 0.0), get("k2", 0.0), get("delta_obs", 0.05));
    }
    if (name == "cubic") {
        reject_unknown({"rho1", "rho2"});
        return preset_cubic(get("rho1", 0.0), get("rho2", 1.0));
    }
    if (name == "zero") {
        reject_unknown({});
        return zero_model();
    }
    throw std::invalid_argument("make_preset: unknown model '" + name + "'");
}

}  // namespace mvsim
