#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mvsim/measure.hpp"
#include "mvsim/model.hpp"
#include "mvsim/reduce.hpp"
#include "mvsim/rng.hpp"

namespace mvsim {

enum class SchemeKind { explicit_em, backward_em };

inline const char* to_string(SchemeKind k) {
    return k == SchemeKind::explicit_em ? "explicit_em" : "backward_em";
}

inline SchemeKind scheme_from_string(const std::string& s) {
    if (s == "explicit_em" || s == "em") return SchemeKind::explicit_em;
    if (s == "backward_em" || s == "bem") return SchemeKind::backward_em;
    throw std::invalid_argument("unknown scheme '" + s + "' (use explicit_em or backward_em)");
}

struct SchemeConfig {
    SchemeKind kind = SchemeKind::explicit_em;
    double dt = 0.01;
    std::size_t steps = 100;  // k_max; records are produced at 0..k_max
    std::size_t n = 100;      // particles N
    std::size_t paths = 1;    // Monte-Carlo paths M
    std::uint64_t seed = 0;
    double implicit_tol = 1e-12;
    std::size_t implicit_max_iter = 100;
    std::optional<double> obs_gap;  // observation gap delta for feedback models
    double divergence_threshold = 1e12;

    void validate() const {
        if (!(dt > 0.0 && dt < 1.0))
            throw std::invalid_argument("SchemeConfig: dt must lie in (0,1)");
        if (steps == 0) throw std::invalid_argument("SchemeConfig: steps must be positive");
        if (n == 0) throw std::invalid_argument("SchemeConfig: n must be positive");
        if (paths == 0) throw std::invalid_argument("SchemeConfig: paths must be positive");
        if (!(implicit_tol > 0.0))
            throw std::invalid_argument("SchemeConfig: implicit_tol must be positive");
        if (implicit_max_iter == 0)
            throw std::invalid_argument("SchemeConfig: implicit_max_iter must be positive");
        if (!(divergence_threshold > 0.0))
            throw std::invalid_argument("SchemeConfig: divergence_threshold must be positive");
        if (obs_gap) {
            if (!(*obs_gap > 0.0))
                throw std::invalid_argument("SchemeConfig: obs_gap must be positive");
            const double ratio = *obs_gap / dt;
            if (std::fabs(ratio - std::llround(ratio)) > 1e-9 * std::max(1.0, ratio))
                throw std::invalid_argument("SchemeConfig: obs_gap must be a multiple of dt");
        }
    }
};

// Per-step observables, the quantities every figure plots.
struct StepRecord {
    std::int64_t step = 0;
    double time = 0.0;
    double mean_square = 0.0;  // (1/N) sum |x_i|^2
    std::vector<double> mean;
    double max_norm = 0.0;          // max_i |x_i|
    std::size_t implicit_iters = 0;  // max over particles this step (backward EM)
    bool diverged = false;
};

class ImplicitSolveFailure : public std::runtime_error {
public:
    ImplicitSolveFailure(std::size_t particle_, double residual_)
        : std::runtime_error("implicit solve failed at particle " +
                             std::to_string(particle_) + " with residual " +
                             std::to_string(residual_)),
          particle(particle_),
          residual(residual_) {}
    std::size_t particle;
    double residual;
};

namespace detail {

inline bool exceeds_threshold(const ParticleCloud& c, double threshold) {
    for (double v : c.atoms)
        if (!std::isfinite(v) || std::fabs(v) > threshold) return true;
    return false;
}

// In-place Gaussian elimination with partial pivoting for the small d x d
// Newton system. Returns false on a (numerically) singular matrix.
inline bool solve_dense(std::vector<double>& a, std::vector<double>& b, std::size_t d) {
    for (std::size_t col = 0; col < d; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < d; ++r)
            if (std::fabs(a[r * d + col]) > std::fabs(a[piv * d + col])) piv = r;
        if (std::fabs(a[piv * d + col]) < 1e-300) return false;
        if (piv != col) {
            for (std::size_t c = col; c < d; ++c) std::swap(a[col * d + c], a[piv * d + c]);
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = col + 1; r < d; ++r) {
            const double f = a[r * d + col] / a[col * d + col];
            for (std::size_t c = col; c < d; ++c) a[r * d + c] -= f * a[col * d + c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t r = d; r-- > 0;) {
        double s = b[r];
        for (std::size_t c = r + 1; c < d; ++c) s -= a[r * d + c] * b[c];
        b[r] = s / a[r * d + r];
    }
    return true;
}

inline double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace detail

struct ImplicitResult {
    std::vector<double> z;
    std::size_t iters = 0;
    double residual = 0.0;
};

// Solves F(z) = z - dt*drift(z) - rhs_const = 0 by damped Newton with the
// explicit predictor z0 = rhs_const. The Jacobian is analytic when given,
// otherwise central finite differences. After two rejected Newton steps the
// solver switches to the damped fixed-point map
//   z <- (1-w) z + w (rhs_const + dt*drift(z)),  w = 1/(1 + dt*Lhat),
// with Lhat a local Lipschitz estimate from the Jacobian. Residuals are
// measured in the max norm.
inline ImplicitResult solve_implicit(
    const std::function<void(const double*, double*)>& frozen_drift,
    const std::function<void(const double*, double*)>& jacobian,  // may be empty
    double dt, const std::vector<double>& rhs_const, double tol,
    std::size_t max_iter) {
    if (!(dt > 0.0)) throw std::invalid_argument("solve_implicit: dt must be positive");
    const std::size_t d = rhs_const.size();
    std::vector<double> z = rhs_const;
    std::vector<double> bz(d), f(d), jac(d * d), step(d), ztrial(d), ftrial(d);
    std::vector<double> zp(d), zm(d), bp(d), bm(d);

    auto eval_residual = [&](const std::vector<double>& at, std::vector<double>& out_b,
                             std::vector<double>& out_f) {
        frozen_drift(at.data(), out_b.data());
        for (std::size_t c = 0; c < d; ++c) out_f[c] = at[c] - dt * out_b[c] - rhs_const[c];
        return detail::inf_norm(out_f);
    };

    auto eval_drift_jacobian = [&](const std::vector<double>& at, std::vector<double>& out) {
        if (jacobian) {
            jacobian(at.data(), out.data());
            return;
        }
        zp = at;
        zm = at;
        for (std::size_t c = 0; c < d; ++c) {
            const double h = std::max(1e-7, 1e-7 * std::fabs(at[c]));
            zp[c] = at[c] + h;
            zm[c] = at[c] - h;
            frozen_drift(zp.data(), bp.data());
            frozen_drift(zm.data(), bm.data());
            for (std::size_t r = 0; r < d; ++r) out[r * d + c] = (bp[r] - bm[r]) / (2.0 * h);
            zp[c] = at[c];
            zm[c] = at[c];
        }
    };

    double res = eval_residual(z, bz, f);
    std::size_t rejected = 0;
    bool damped = false;
    double omega = 1.0;
    for (std::size_t iter = 1; iter <= max_iter; ++iter) {
        if (res <= tol || !std::isfinite(res)) {
            if (!std::isfinite(res)) break;
            return {z, iter, res};
        }
        if (!damped) {
            eval_drift_jacobian(z, jac);
            std::vector<double> mat(d * d);
            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t c = 0; c < d; ++c)
                    mat[r * d + c] = (r == c ? 1.0 : 0.0) - dt * jac[r * d + c];
            step = f;
            const bool solved = detail::solve_dense(mat, step, d);
            double trial_res = std::numeric_limits<double>::infinity();
            if (solved) {
                for (std::size_t c = 0; c < d; ++c) ztrial[c] = z[c] - step[c];
                trial_res = eval_residual(ztrial, bz, ftrial);
            }
            if (solved && trial_res < res) {
                z = ztrial;
                f = ftrial;
                res = trial_res;
                continue;
            }
            if (++rejected >= 2) {
                damped = true;
                eval_drift_jacobian(z, jac);
                double lhat = 0.0;
                for (std::size_t r = 0; r < d; ++r) {
                    double row = 0.0;
                    for (std::size_t c = 0; c < d; ++c) row += std::fabs(jac[r * d + c]);
                    lhat = std::max(lhat, row);
                }
                omega = 1.0 / (1.0 + dt * lhat);
            }
            continue;
        }
        frozen_drift(z.data(), bz.data());
        for (std::size_t c = 0; c < d; ++c)
            z[c] = (1.0 - omega) * z[c] + omega * (rhs_const[c] + dt * bz[c]);
        res = eval_residual(z, bz, f);
    }
    throw ImplicitSolveFailure(std::size_t(-1), res);
}

namespace detail {

// Computes sigma(x, mu) * dW into out (d vector), sigma row-major d x m.
inline void apply_diffusion(const ModelSpec& model, const double* x, const MeasureView& mu,
                            const double* dw, std::vector<double>& sigma_buf, double* out) {
    model.diffusion(x, mu, sigma_buf.data());
    for (std::size_t r = 0; r < model.d; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < model.m; ++c) s += sigma_buf[r * model.m + c] * dw[c];
        out[r] = s;
    }
}

inline ObsView obs_view_for(const ObservationSnapshot* obs, std::size_t i, std::size_t d) {
    ObsView v;
    if (obs != nullptr) {
        v.state = obs->state_obs.data() + i * d;
        v.mean = obs->mean_obs.data();
        v.time = obs->obs_time;
    }
    return v;
}

}  // namespace detail

// One explicit step: y <- y + b(y, mu)*dt + sigma(y, mu)*dW. The measure is
// read once from the input cloud, so the update is synchronous: no particle
// sees a neighbour's new position.
inline ParticleCloud em_step(const ParticleCloud& cloud, const ModelSpec& model,
                             const SchemeConfig& cfg, const double* noise,
                             const ObservationSnapshot* obs = nullptr) {
    ParticleCloud out = cloud;
    out.step = cloud.step + 1;
    out.time = double(out.step) * cfg.dt;
    if (cloud.diverged) return out;

    const MeasureView mu(cloud);
    const std::size_t d = model.d, m = model.m;
    std::vector<double> b(d), sig(d * m), diff(d);
    for (std::size_t i = 0; i < cloud.n; ++i) {
        const double* x = cloud.atom(i);
        const ObsView ov = detail::obs_view_for(obs, i, d);
        model.drift(x, mu, model.uses_observation ? &ov : nullptr, b.data());
        detail::apply_diffusion(model, x, mu, noise + i * m, sig, diff.data());
        double* y = out.atom(i);
        for (std::size_t c = 0; c < d; ++c) y[c] = x[c] + b[c] * cfg.dt + diff[c];
    }
    out.diverged = detail::exceeds_threshold(out, cfg.divergence_threshold);
    return out;
}

// One drift-implicit step: z = y + b(z, mu)*dt + sigma(y, mu)*dW with the
// measure lagged at the input cloud. The solve is in the state variable only,
// so particles are independent given mu.
inline ParticleCloud bem_step(const ParticleCloud& cloud, const ModelSpec& model,
                              const SchemeConfig& cfg, const double* noise,
                              const ObservationSnapshot* obs = nullptr,
                              std::size_t* max_iters = nullptr,
                              double* max_residual = nullptr) {
    ParticleCloud out = cloud;
    out.step = cloud.step + 1;
    out.time = double(out.step) * cfg.dt;
    if (max_iters) *max_iters = 0;
    if (max_residual) *max_residual = 0.0;
    if (cloud.diverged) return out;

    const MeasureView mu(cloud);
    const std::size_t d = model.d, m = model.m;
    std::vector<double> sig(d * m), rhs(d);
    std::size_t iters_hi = 0;
    double resid_hi = 0.0;
    for (std::size_t i = 0; i < cloud.n; ++i) {
        const double* y = cloud.atom(i);
        detail::apply_diffusion(model, y, mu, noise + i * m, sig, rhs.data());
        for (std::size_t c = 0; c < d; ++c) rhs[c] += y[c];
        const ObsView ov = detail::obs_view_for(obs, i, d);
        const ObsView* ovp = model.uses_observation ? &ov : nullptr;
        auto frozen = [&](const double* z, double* outv) { model.drift(z, mu, ovp, outv); };
        std::function<void(const double*, double*)> jac;
        if (model.drift_jacobian)
            jac = [&](const double* z, double* outv) { model.drift_jacobian(z, mu, outv); };
        ImplicitResult r;
        try {
            r = solve_implicit(frozen, jac, cfg.dt, rhs, cfg.implicit_tol,
                               cfg.implicit_max_iter);
        } catch (const ImplicitSolveFailure& e) {
            throw ImplicitSolveFailure(i, e.residual);
        }
        std::copy(r.z.begin(), r.z.end(), out.atom(i));
        iters_hi = std::max(iters_hi, r.iters);
        resid_hi = std::max(resid_hi, r.residual);
    }
    if (max_iters) *max_iters = iters_hi;
    if (max_residual) *max_residual = resid_hi;
    out.diverged = detail::exceeds_threshold(out, cfg.divergence_threshold);
    return out;
}

inline ParticleCloud init_cloud(const ModelSpec& model, const SchemeConfig& cfg,
                                std::uint64_t path, std::size_t n_override = 0) {
    const std::size_t n = n_override ? n_override : cfg.n;
    ParticleCloud c(n, model.d);
    for (std::size_t i = 0; i < n; ++i)
        initial_sample(cfg.seed, std::uint32_t(path), std::uint32_t(i), int(model.d),
                       model.init_mean, model.init_std, c.atom(i));
    c.diverged = detail::exceeds_threshold(c, cfg.divergence_threshold);
    return c;
}

inline StepRecord make_record(const ParticleCloud& cloud, std::size_t implicit_iters) {
    StepRecord rec;
    rec.step = cloud.step;
    rec.time = cloud.time;
    rec.diverged = cloud.diverged;
    rec.implicit_iters = implicit_iters;
    const MeasureView mu(cloud);
    rec.mean.assign(mu.mean(), mu.mean() + cloud.d);
    rec.mean_square = mu.raw_moment(2.0);
    double hi = 0.0;
    for (std::size_t i = 0; i < cloud.n; ++i) {
        double sq = 0.0;
        for (std::size_t c = 0; c < cloud.d; ++c) sq += cloud.atom(i)[c] * cloud.atom(i)[c];
        hi = std::max(hi, sq);
    }
    rec.max_norm = std::sqrt(hi);
    return rec;
}

// Runs one path, streaming a StepRecord per step to the observer (steps
// 0..k_max inclusive). Memory stays O(N*d). On divergence the final record
// carries diverged=true and the run stops.
template <typename Observer>
void simulate_path(const ModelSpec& model, const SchemeConfig& cfg, std::uint64_t path,
                   Observer&& observer) {
    cfg.validate();
    double gap = 0.0;
    std::size_t gap_steps = 0;
    if (model.uses_observation) {
        if (cfg.obs_gap)
            gap = *cfg.obs_gap;
        else if (model.obs_gap)
            gap = *model.obs_gap;
        else
            throw std::invalid_argument("simulate_path: model requires obs_gap");
        const double ratio = gap / cfg.dt;
        gap_steps = std::size_t(std::llround(ratio));
        if (gap_steps == 0 || std::fabs(ratio - double(gap_steps)) > 1e-9 * ratio)
            throw std::invalid_argument("simulate_path: obs_gap must be a multiple of dt");
    }

    ParticleCloud cloud = init_cloud(model, cfg, path);
    ObservationSnapshot snapshot;
    observer(make_record(cloud, 0));
    if (cloud.diverged) return;

    std::vector<double> noise(cloud.n * model.m);
    for (std::size_t k = 0; k < cfg.steps; ++k) {
        if (model.uses_observation && k % gap_steps == 0) {
            snapshot.state_obs = cloud.atoms;
            snapshot.mean_obs = mean(cloud);
            snapshot.obs_time = cloud.time;
        }
        for (std::size_t i = 0; i < cloud.n; ++i)
            brownian_increment(cfg.seed, std::uint32_t(path), std::uint32_t(i),
                               std::uint32_t(k), int(model.m), cfg.dt,
                               noise.data() + i * model.m);
        std::size_t iters = 0;
        if (cfg.kind == SchemeKind::explicit_em) {
            cloud = em_step(cloud, model, cfg, noise.data(),
                            model.uses_observation ? &snapshot : nullptr);
        } else {
            cloud = bem_step(cloud, model, cfg, noise.data(),
                             model.uses_observation ? &snapshot : nullptr, &iters, nullptr);
        }
        observer(make_record(cloud, iters));
        if (cloud.diverged) return;
    }
}

// Path-ensemble summary. Per-path series are padded with NaN after a
// divergence record; the path average is truncated just before the earliest
// divergence so it never mixes live and blown-up paths.
struct EnsembleResult {
    std::vector<double> times;                    // full grid, steps+1
    std::vector<std::vector<double>> path_ms;     // [paths][steps+1]
    std::vector<std::vector<double>> path_mean1;  // first mean coordinate
    std::vector<double> avg_ms;                   // length = valid_steps
    std::size_t valid_steps = 0;
    bool any_diverged = false;
    double first_divergence_time = std::numeric_limits<double>::quiet_NaN();
    std::size_t diverged_paths = 0;
    std::size_t max_implicit_iters = 0;
};

inline EnsembleResult run_ensemble(const ModelSpec& model, const SchemeConfig& cfg) {
    cfg.validate();
    const std::size_t rows = cfg.paths, cols = cfg.steps + 1;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    EnsembleResult out;
    out.times.resize(cols);
    for (std::size_t k = 0; k < cols; ++k) out.times[k] = double(k) * cfg.dt;
    out.path_ms.assign(rows, std::vector<double>(cols, nan));
    out.path_mean1.assign(rows, std::vector<double>(cols, nan));
    std::vector<std::size_t> path_records(rows, 0);
    std::vector<char> path_diverged(rows, 0);
    std::vector<std::size_t> path_iters(rows, 0);
    std::exception_ptr failure;
    std::size_t failure_path = rows;

#pragma omp parallel for schedule(static)
    for (long long pi = 0; pi < (long long)rows; ++pi) {
        const std::size_t p = std::size_t(pi);
        try {
            simulate_path(model, cfg, p, [&](const StepRecord& rec) {
                const auto k = std::size_t(rec.step);
                out.path_ms[p][k] = rec.mean_square;
                out.path_mean1[p][k] = rec.mean.empty() ? nan : rec.mean[0];
                path_records[p] = k + 1;
                path_diverged[p] = rec.diverged ? 1 : 0;
                path_iters[p] = std::max(path_iters[p], rec.implicit_iters);
            });
        } catch (...) {
#pragma omp critical
            {
                if (!failure || p < failure_path) {
                    failure = std::current_exception();
                    failure_path = p;
                }
            }
        }
    }
    if (failure) std::rethrow_exception(failure);

    out.valid_steps = cols;
    for (std::size_t p = 0; p < rows; ++p) {
        out.max_implicit_iters = std::max(out.max_implicit_iters, path_iters[p]);
        if (path_diverged[p]) {
            out.any_diverged = true;
            ++out.diverged_paths;
            const double t_div = out.times[path_records[p] - 1];
            if (std::isnan(out.first_divergence_time) || t_div < out.first_divergence_time)
                out.first_divergence_time = t_div;
            out.valid_steps = std::min(out.valid_steps, path_records[p] - 1);
        }
    }
    out.avg_ms.resize(out.valid_steps);
    for (std::size_t k = 0; k < out.valid_steps; ++k)
        out.avg_ms[k] = pairwise_sum_indexed(0, rows, [&](std::size_t p) {
                            return out.path_ms[p][k];
                        }) /
                        double(rows);
    return out;
}

// Coupled interacting/reference runs for the particle-limit experiment.
struct CoupledResult {
    std::vector<double> times;
    std::vector<std::size_t> n_list;
    std::vector<std::vector<double>> e;  // [n][steps+1], path-averaged, NaN past divergence
    std::string reference_kind;          // "mean_ode" or "proxy"
    std::size_t n_ref = 0;
};

namespace detail {

// Advances the non-interacting reference copies one step. Every copy reads
// the same limit-law surrogate: a one-atom measure at the deterministic mean.
inline void advance_reference_mean_ode(ParticleCloud& ref, const ModelSpec& model,
                                       const SchemeConfig& cfg, std::uint64_t path,
                                       std::size_t k, std::vector<double>& mhat,
                                       std::vector<double>& noise) {
    const MeasureView mu(mhat.data(), 1, model.d);
    const std::size_t d = model.d, m = model.m;
    std::vector<double> b(d), sig(d * m), rhs(d);
    for (std::size_t i = 0; i < ref.n; ++i)
        brownian_increment(cfg.seed, std::uint32_t(path), std::uint32_t(i),
                           std::uint32_t(k), int(m), cfg.dt, noise.data() + i * m);
    for (std::size_t i = 0; i < ref.n; ++i) {
        double* x = ref.atom(i);
        if (cfg.kind == SchemeKind::explicit_em) {
            model.drift(x, mu, nullptr, b.data());
            apply_diffusion(model, x, mu, noise.data() + i * m, sig, rhs.data());
            // Same association as em_step so measure-free models couple exactly.
            for (std::size_t c = 0; c < d; ++c) x[c] = x[c] + b[c] * cfg.dt + rhs[c];
        } else {
            apply_diffusion(model, x, mu, noise.data() + i * m, sig, rhs.data());
            for (std::size_t c = 0; c < d; ++c) rhs[c] += x[c];
            auto frozen = [&](const double* z, double* outv) {
                model.drift(z, mu, nullptr, outv);
            };
            std::function<void(const double*, double*)> jac;
            if (model.drift_jacobian)
                jac = [&](const double* z, double* outv) {
                    model.drift_jacobian(z, mu, outv);
                };
            ImplicitResult r = solve_implicit(frozen, jac, cfg.dt, rhs, cfg.implicit_tol,
                                              cfg.implicit_max_iter);
            std::copy(r.z.begin(), r.z.end(), x);
        }
    }
    // The limit mean follows its closed ODE m' = rate*m, discretized by the
    // matching one-step rule.
    const double rate = *model.mean_ode_rate;
    for (std::size_t c = 0; c < model.d; ++c)
        mhat[c] = cfg.kind == SchemeKind::explicit_em ? mhat[c] * (1.0 + rate * cfg.dt)
                                                      : mhat[c] / (1.0 - rate * cfg.dt);
    ref.step += 1;
    ref.time = double(ref.step) * cfg.dt;
    ref.diverged = exceeds_threshold(ref, cfg.divergence_threshold);
}

}  // namespace detail

// For each N in n_list, runs the interacting system next to the reference
// (non-interacting) system under identical Brownian increments per
// (path, particle, step) and returns the path-averaged coupling error
//   e_N(t_k) = (1/N) sum_i |X^i_k - X^{i,N}_k|^2.
// Models with a closed linear mean ODE use the exact deterministic mean as
// the limit-law surrogate; anything else couples against a frozen large-N
// proxy run with N_ref = proxy_factor * max(n_list).
inline CoupledResult simulate_coupled(const ModelSpec& model, const SchemeConfig& cfg,
                                      const std::vector<std::size_t>& n_list,
                                      std::size_t proxy_factor = 8) {
    cfg.validate();
    if (n_list.empty()) throw std::invalid_argument("simulate_coupled: empty n_list");
    if (!std::is_sorted(n_list.begin(), n_list.end()))
        throw std::invalid_argument("simulate_coupled: n_list must be ascending");
    if (n_list.front() == 0) throw std::invalid_argument("simulate_coupled: n must be >= 1");
    if (model.uses_observation)
        throw std::invalid_argument("simulate_coupled: observation models unsupported");
    if (proxy_factor == 0)
        throw std::invalid_argument("simulate_coupled: proxy_factor must be >= 1");

    const bool mean_ode = model.mean_ode_rate.has_value();
    const std::size_t max_n = n_list.back();
    const std::size_t cols = cfg.steps + 1;
    const std::size_t d = model.d, m = model.m;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    CoupledResult out;
    out.times.resize(cols);
    for (std::size_t k = 0; k < cols; ++k) out.times[k] = double(k) * cfg.dt;
    out.n_list = n_list;
    out.reference_kind = mean_ode ? "mean_ode" : "proxy";
    out.n_ref = mean_ode ? 0 : proxy_factor * max_n;

    // e_rows[n_idx][path][k]; per-path rows are filled independently, the
    // final average is a fixed-topology reduction over paths.
    std::vector<std::vector<std::vector<double>>> e_rows(
        n_list.size(),
        std::vector<std::vector<double>>(cfg.paths, std::vector<double>(cols, nan)));
    std::exception_ptr failure;
    std::size_t failure_path = cfg.paths;

#pragma omp parallel for schedule(static)
    for (long long pi = 0; pi < (long long)cfg.paths; ++pi) {
        const std::size_t p = std::size_t(pi);
        try {
            // Reference trajectories for the first max_n particles, cached
            // across the per-N runs (the keys do not depend on N).
            std::vector<double> ref_traj(cols * max_n * d, nan);
            std::size_t ref_valid = 0;  // records cached so far
            {
                SchemeConfig rcfg = cfg;
                rcfg.n = mean_ode ? max_n : proxy_factor * max_n;
                ParticleCloud ref = init_cloud(model, rcfg, p, rcfg.n);
                std::vector<double> mhat(d, model.init_mean);
                std::vector<double> noise(ref.n * m);
                auto cache = [&](const ParticleCloud& c, std::size_t k) {
                    for (std::size_t i = 0; i < max_n; ++i)
                        for (std::size_t cc = 0; cc < d; ++cc)
                            ref_traj[(k * max_n + i) * d + cc] = c.atom(i)[cc];
                };
                cache(ref, 0);
                ref_valid = 1;
                if (!ref.diverged) {
                    for (std::size_t k = 0; k < cfg.steps; ++k) {
                        if (mean_ode) {
                            detail::advance_reference_mean_ode(ref, model, rcfg, p, k, mhat,
                                                               noise);
                        } else {
                            for (std::size_t i = 0; i < ref.n; ++i)
                                brownian_increment(rcfg.seed, std::uint32_t(p),
                                                   std::uint32_t(i), std::uint32_t(k),
                                                   int(m), rcfg.dt, noise.data() + i * m);
                            std::size_t it = 0;
                            ref = rcfg.kind == SchemeKind::explicit_em
                                      ? em_step(ref, model, rcfg, noise.data())
                                      : bem_step(ref, model, rcfg, noise.data(), nullptr,
                                                 &it, nullptr);
                        }
                        cache(ref, k + 1);
                        ref_valid = k + 2;
                        if (ref.diverged) break;
                    }
                }
            }

            for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
                const std::size_t N = n_list[ni];
                SchemeConfig icfg = cfg;
                icfg.n = N;
                ParticleCloud cloud = init_cloud(model, icfg, p, N);
                std::vector<double> noise(N * m);
                auto record_error = [&](const ParticleCloud& c, std::size_t k) {
                    if (k >= ref_valid) return;
                    e_rows[ni][p][k] =
                        pairwise_sum_indexed(0, N, [&](std::size_t i) {
                            double sq = 0.0;
                            for (std::size_t cc = 0; cc < d; ++cc) {
                                const double diff = ref_traj[(k * max_n + i) * d + cc] -
                                                    c.atom(i)[cc];
                                sq += diff * diff;
                            }
                            return sq;
                        }) /
                        double(N);
                };
                record_error(cloud, 0);
                if (cloud.diverged) continue;
                for (std::size_t k = 0; k < cfg.steps; ++k) {
                    for (std::size_t i = 0; i < N; ++i)
                        brownian_increment(icfg.seed, std::uint32_t(p), std::uint32_t(i),
                                           std::uint32_t(k), int(m), icfg.dt,
                                           noise.data() + i * m);
                    std::size_t it = 0;
                    cloud = icfg.kind == SchemeKind::explicit_em
                                ? em_step(cloud, model, icfg, noise.data())
                                : bem_step(cloud, model, icfg, noise.data(), nullptr, &it,
                                           nullptr);
                    record_error(cloud, k + 1);
                    if (cloud.diverged) break;
                }
            }
        } catch (...) {
#pragma omp critical
            {
                if (!failure || p < failure_path) {
                    failure = std::current_exception();
                    failure_path = p;
                }
            }
        }
    }
    if (failure) std::rethrow_exception(failure);

    out.e.assign(n_list.size(), std::vector<double>(cols, nan));
    for (std::size_t ni = 0; ni < n_list.size(); ++ni)
        for (std::size_t k = 0; k < cols; ++k) {
            bool all = true;
            for (std::size_t p = 0; p < cfg.paths && all; ++p)
                all = !std::isnan(e_rows[ni][p][k]);
            if (!all) continue;
            out.e[ni][k] = pairwise_sum_indexed(0, cfg.paths, [&](std::size_t p) {
                               return e_rows[ni][p][k];
                           }) /
                           double(cfg.paths);
        }
    return out;
}

}  // namespace mvsim
