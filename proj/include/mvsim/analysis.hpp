#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvsim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Fitted exponential rate of a positive statistic. Sign conventions are
// explicit: empirical_rate is the signed regression slope (negative means
// decay), theoretical_rate is the positive decay rate the theory predicts,
// so a perfect match reads empirical_rate = -theoretical_rate.
struct StabilityReport {
    double empirical_rate = 0.0;
    std::optional<double> theoretical_rate;
    double r_squared = 0.0;
    double slope_stderr = 0.0;
    double window_start = 0.0;
    double window_end = 0.0;
    std::string statistic_kind = "mean_square";

    double empirical_decay_rate() const { return -empirical_rate; }
};

// Coupling-error fit against the particle count.
struct ChaosReport {
    std::vector<double> n_values;
    std::vector<double> e_values;
    double slope = 0.0;
    double slope_stderr = 0.0;
    double intercept = 0.0;  // fitted log-prefactor
    double r_squared = 0.0;
    double theoretical_exponent = 0.0;  // signed, e.g. -1/2
    double q_used = kInf;
};

namespace detail {

struct OlsFit {
    double slope, intercept, r_squared, slope_stderr;
};

inline OlsFit ols(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("ols: degenerate abscissa");
    OlsFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    const double resid = std::max(0.0, syy - fit.slope * sxy);
    fit.slope_stderr = n > 2 ? std::sqrt(resid / (double(n - 2) * sxx)) : 0.0;
    return fit;
}

}  // namespace detail

// OLS of log(v) on t over [t0, t1]. Rejects windows with fewer than 10
// points and any nonpositive or non-finite value inside the window, since
// log of a blown-up or extinct series is meaningless.
inline StabilityReport estimate_rate(const std::vector<double>& times,
                                     const std::vector<double>& values, double t0,
                                     double t1,
                                     const std::string& statistic_kind = "mean_square") {
    if (times.size() != values.size())
        throw std::invalid_argument("estimate_rate: size mismatch");
    if (!(t0 < t1)) throw std::invalid_argument("estimate_rate: empty window");
    std::vector<double> tx, ly;
    const double eps = 1e-12 * std::max(1.0, std::fabs(t1));
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < t0 - eps || times[i] > t1 + eps) continue;
        if (!(values[i] > 0.0) || !std::isfinite(values[i]))
            throw std::invalid_argument(
                "estimate_rate: nonpositive or non-finite value inside window at t = " +
                std::to_string(times[i]));
        tx.push_back(times[i]);
        ly.push_back(std::log(values[i]));
    }
    if (tx.size() < 10)
        throw std::invalid_argument("estimate_rate: window holds " +
                                    std::to_string(tx.size()) + " points, need >= 10");
    const detail::OlsFit fit = detail::ols(tx, ly);
    StabilityReport rep;
    rep.empirical_rate = fit.slope;
    rep.r_squared = fit.r_squared;
    rep.slope_stderr = fit.slope_stderr;
    rep.window_start = t0;
    rep.window_end = t1;
    rep.statistic_kind = statistic_kind;
    return rep;
}

// Per-path slope distribution for almost-sure statements: the theorems bound
// every path, so each row of the ensemble gets its own regression.
struct PathRateSummary {
    std::vector<double> slopes;
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::size_t negative_count = 0;
};

inline PathRateSummary estimate_path_rates(const std::vector<double>& times,
                                           const std::vector<std::vector<double>>& series,
                                           double t0, double t1) {
    if (series.empty()) throw std::invalid_argument("estimate_path_rates: no paths");
    PathRateSummary out;
    out.slopes.reserve(series.size());
    for (const auto& row : series)
        out.slopes.push_back(estimate_rate(times, row, t0, t1, "pathwise_average")
                                 .empirical_rate);
    std::vector<double> sorted = out.slopes;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    out.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    out.min = sorted.front();
    out.max = sorted.back();
    for (double s : out.slopes)
        if (s < 0.0) ++out.negative_count;
    return out;
}

// Bisection for a sign change of f on [lo, hi], refined to relative width.
inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     double rel_tol = 1e-14, int max_iter = 400) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo < 0.0) == (fhi < 0.0))
        throw std::invalid_argument("bisect: no sign change on bracket");
    for (int i = 0; i < max_iter; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0 || (hi - lo) <= rel_tol * std::max(1.0, std::fabs(mid))) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

namespace detail {

// Smallest positive root of p, located by a geometric scan then bisection.
// Returns infinity when p keeps its sign on (0, hi_limit].
inline double smallest_positive_root(const std::function<double(double)>& p,
                                     double hi_limit = 1e6) {
    double x_prev = 0.0;
    double f_prev = p(0.0);
    if (f_prev == 0.0) f_prev = -1e-300;  // boundary handled by preconditions upstream
    for (double x = 1e-9; x <= hi_limit; x *= 1.02) {
        const double fx = p(x);
        if (fx == 0.0) return x;
        if ((fx < 0.0) != (f_prev < 0.0))
            return bisect(p, x_prev, x);
        x_prev = x;
        f_prev = fx;
    }
    return kInf;
}

// Doubles hi until f(hi) changes sign against f(lo); used to bracket the
// rate-equation roots above lambda = 1.
inline double bracket_and_bisect(const std::function<double(double)>& f, double lo) {
    const double flo = f(lo);
    double hi = lo + 1.0;
    for (int i = 0; i < 400 && (f(hi) < 0.0) == (flo < 0.0); ++i) hi *= 2.0;
    return bisect(f, lo, hi);
}

}  // namespace detail

// Largest admissible stepsize for the explicit mean-square rate equation:
// Delta_0 = min(Delta_1, Delta_2, 1) with Delta_1 = (a1-a2)/(b1+b2) and
// Delta_2 the smallest positive root of (b1+b2) D^2 + (a2-a1) D + 1.
inline double ms_max_stepsize(double a1, double a2, double b1, double b2) {
    if (!(a1 > a2)) throw std::invalid_argument("ms_max_stepsize: requires a1 > a2");
    const double b = b1 + b2, da = a1 - a2;
    const double d1 = b > 0.0 ? da / b : kInf;
    double d2 = kInf;
    if (b > 0.0) {
        const double disc = da * da - 4.0 * b;
        if (disc >= 0.0) d2 = (da - std::sqrt(disc)) / (2.0 * b);
    } else {
        d2 = 1.0 / da;
    }
    return std::min({d1, d2, 1.0});
}

struct MsRate {
    double lambda_star;  // root of h in (1, infinity)
    double theta_star;   // positive decay rate, log(lambda_star)
};

// Mean-square rate of the explicit scheme from the closed form
//   lambda* = ((b1+b2) D^2 + (a2-a1) D + 1)^(-1/D),  theta* = log lambda*.
inline MsRate ms_rate_equation(double dt, double a1, double a2, double b1, double b2) {
    if (!(a1 > a2)) throw std::invalid_argument("ms_rate_equation: requires a1 > a2");
    const double d0 = ms_max_stepsize(a1, a2, b1, b2);
    if (!(dt > 0.0) || !(dt < d0))
        throw std::invalid_argument("ms_rate_equation: dt must lie in (0, " +
                                    std::to_string(d0) + ")");
    const double bracket = (b1 + b2) * dt * dt + (a2 - a1) * dt + 1.0;
    MsRate r;
    r.theta_star = -std::log(bracket) / dt;
    r.lambda_star = std::pow(bracket, -1.0 / dt);
    return r;
}

// Independent root-finding route to lambda*: bisection on
// h(lambda) = lambda^D ((b1+b2) D^2 + (a2-a1) D + 1) - 1.
inline double ms_lambda_by_bisection(double dt, double a1, double a2, double b1,
                                     double b2) {
    const double bracket = (b1 + b2) * dt * dt + (a2 - a1) * dt + 1.0;
    if (!(bracket > 0.0) || !(bracket < 1.0))
        throw std::invalid_argument("ms_lambda_by_bisection: no root above 1");
    auto h = [&](double lam) { return std::pow(lam, dt) * bracket - 1.0; };
    return detail::bracket_and_bisect(h, 1.0);
}

// Largest admissible stepsize for the explicit almost-sure rate equation:
// the minimum of the positivity bound on 1 + b1 D^2 - c1 D, the f(1) < 0
// bound D < c1/b1, the monotonicity bound (smallest positive root of the
// cubic below), and 1.
inline double as_max_stepsize(double b1, double b2, double c1, double c2) {
    if (!(c1 > c2)) throw std::invalid_argument("as_max_stepsize: requires c1 > c2");
    double d1 = kInf;
    if (b1 > 0.0) {
        const double disc = c1 * c1 - 4.0 * b1;
        if (disc >= 0.0) d1 = (c1 - std::sqrt(disc)) / (2.0 * b1);
    } else if (c1 > 0.0) {
        d1 = 1.0 / c1;
    }
    const double d2 = b1 > 0.0 ? c1 / b1 : kInf;
    auto cubic = [&](double x) {
        return 2.0 * b1 * b1 * x * x * x - (b1 * c2 + c1 * b2 + 3.0 * b1 * c1) * x * x +
               (2.0 * b1 + 2.0 * b2 + c1 * c1) * x + (c2 - c1);
    };
    const double d3 = detail::smallest_positive_root(cubic);
    return std::min({d1, d2, d3, 1.0});
}

struct AsRate {
    double vartheta_star;  // root of f in (1, infinity)
    double xi_star;        // positive almost-sure decay rate
};

// Almost-sure rate of the explicit scheme:
//   xi* = -log(1 + b1 D^2 - c1 D)/D - (b2 D + c2)/(1 + b1 D^2 - c1 D),
// positive for every D below the admissible bound.
inline AsRate as_rate_equation(double dt, double b1, double b2, double c1, double c2) {
    if (!(c1 > c2)) throw std::invalid_argument("as_rate_equation: requires c1 > c2");
    const double d0 = as_max_stepsize(b1, b2, c1, c2);
    if (!(dt > 0.0) || !(dt < d0))
        throw std::invalid_argument("as_rate_equation: dt must lie in (0, " +
                                    std::to_string(d0) + ")");
    const double bracket = 1.0 + b1 * dt * dt - c1 * dt;
    AsRate r;
    r.vartheta_star = std::pow(bracket, -1.0 / dt);
    r.xi_star = -std::log(bracket) / dt - (b2 * dt + c2) / bracket;
    return r;
}

// Bisection route to vartheta*: f(lambda) = lambda^D (1 + b1 D^2 - c1 D) - 1.
inline double as_vartheta_by_bisection(double dt, double b1, double c1) {
    const double bracket = 1.0 + b1 * dt * dt - c1 * dt;
    if (!(bracket > 0.0) || !(bracket < 1.0))
        throw std::invalid_argument("as_vartheta_by_bisection: no root above 1");
    auto f = [&](double lam) { return std::pow(lam, dt) * bracket - 1.0; };
    return detail::bracket_and_bisect(f, 1.0);
}

struct BemRate {
    double eta_star;   // root of g in (1, infinity)
    double beta_star;  // positive almost-sure decay rate
};

// Almost-sure rate of the backward scheme:
//   eta* = (1 + (h1 - ct1) D)^(-1/D),
//   beta* = log(eta*) - (ct2 + h2)/(1 + (h1 - ct1) D).
inline BemRate bem_rate_equation(double dt, double ct1, double ct2, double h1, double h2) {
    if (!(ct1 > h1 + ct2 + h2))
        throw std::invalid_argument("bem_rate_equation: requires ct1 > h1 + ct2 + h2");
    const double bracket = 1.0 + (h1 - ct1) * dt;
    if (!(dt > 0.0) || !(bracket > 0.0))
        throw std::invalid_argument("bem_rate_equation: requires 1 + (h1 - ct1) dt > 0");
    BemRate r;
    r.eta_star = std::pow(bracket, -1.0 / dt);
    r.beta_star = std::log(r.eta_star) - (ct2 + h2) / bracket;
    return r;
}

// Bisection route to eta*: g(lambda) = lambda^D (1 + (h1 - ct1) D) - 1.
inline double bem_eta_by_bisection(double dt, double ct1, double h1) {
    const double bracket = 1.0 + (h1 - ct1) * dt;
    if (!(bracket > 0.0) || !(bracket < 1.0))
        throw std::invalid_argument("bem_eta_by_bisection: no root above 1");
    auto g = [&](double lam) { return std::pow(lam, dt) * bracket - 1.0; };
    return detail::bracket_and_bisect(g, 1.0);
}

// Mean-square decay rate of the backward scheme. Unlike the explicit scheme
// this rate carries no stepsize correction.
inline double bem_ms_rate(double l1, double l2, double d2) {
    if (!(l1 > l2 + 2.0 * d2))
        throw std::invalid_argument("bem_ms_rate: requires l1 > l2 + 2*d2");
    return l1 - l2 - 2.0 * d2;
}

// The particle-limit rate function Phi(N), three branches in the dimension.
// Excluded parameter pairs (where the source bound degenerates) are rejected:
// q = 4 for d <= 4, q = d/(d-2) for d > 4.
inline double phi_of_n(double n, int d, double q) {
    if (!(n >= 1.0)) throw std::invalid_argument("phi_of_n: requires N >= 1");
    if (!(q > 2.0)) throw std::invalid_argument("phi_of_n: requires q > 2");
    if (d < 1) throw std::invalid_argument("phi_of_n: requires d >= 1");
    const double moment_exp = q == kInf ? 1.0 : (q - 2.0) / q;
    const double moment_term = std::pow(n, -moment_exp);
    if (d <= 4) {
        if (q == 4.0) throw std::invalid_argument("phi_of_n: q = 4 excluded for d <= 4");
        if (d < 4) return std::pow(n, -0.5) + moment_term;
        return std::pow(n, -0.5) * std::log1p(n) + moment_term;
    }
    if (q == double(d) / double(d - 2))
        throw std::invalid_argument("phi_of_n: q = d/(d-2) excluded for d > 4");
    return std::pow(n, -2.0 / double(d)) + moment_term;
}

// Signed large-N decay exponent of Phi(N): the slower of the two power laws
// wins. The d = 4 logarithmic factor does not move the exponent.
inline double chaos_exponent(int d, double q) {
    const double moment_exp = q == kInf ? 1.0 : (q - 2.0) / q;
    const double measure_exp = d <= 4 ? 0.5 : 2.0 / double(d);
    return -std::min(measure_exp, moment_exp);
}

// Log-log fit of the coupling error against N. Needs at least four distinct
// particle counts and strictly positive errors.
inline ChaosReport fit_chaos_rate(const std::vector<double>& n_values,
                                  const std::vector<double>& e_values, int d = 1,
                                  double q = kInf) {
    if (n_values.size() != e_values.size())
        throw std::invalid_argument("fit_chaos_rate: size mismatch");
    std::vector<double> ln, le;
    for (std::size_t i = 0; i < n_values.size(); ++i) {
        if (!(n_values[i] >= 1.0))
            throw std::invalid_argument("fit_chaos_rate: requires N >= 1");
        if (!(e_values[i] > 0.0) || !std::isfinite(e_values[i]))
            throw std::invalid_argument("fit_chaos_rate: errors must be positive finite");
        ln.push_back(std::log(n_values[i]));
        le.push_back(std::log(e_values[i]));
    }
    std::vector<double> distinct = ln;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 4)
        throw std::invalid_argument("fit_chaos_rate: need >= 4 distinct N values");
    const detail::OlsFit fit = detail::ols(ln, le);
    ChaosReport rep;
    rep.n_values = n_values;
    rep.e_values = e_values;
    rep.slope = fit.slope;
    rep.slope_stderr = fit.slope_stderr;
    rep.intercept = fit.intercept;
    rep.r_squared = fit.r_squared;
    rep.theoretical_exponent = chaos_exponent(d, q);
    rep.q_used = q;
    return rep;
}

}  // namespace mvsim
