#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvsim/model.hpp"
#include "mvsim/scheme.hpp"
#include "mvsim/verify.hpp"

namespace mvsim {

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class RunKind { simulate, rate, chaos, check, control, figures };

inline const char* to_string(RunKind k) {
    switch (k) {
        case RunKind::simulate: return "simulate";
        case RunKind::rate: return "rate";
        case RunKind::chaos: return "chaos";
        case RunKind::check: return "check";
        case RunKind::control: return "control";
        default: return "figures";
    }
}

namespace detail {

inline void require_known_keys(const nlohmann::json& obj,
                               const std::vector<std::string>& allowed,
                               const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const std::string& k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError("config field '" + where + "." + it.key() + "' is unknown");
    }
}

template <class T>
T get_as(const nlohmann::json& obj, const std::string& key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config field '" + where + "." + key + "': " + e.what());
    }
}

}  // namespace detail

// One experiment: a model, a scheme grid, and exactly one subcommand block.
struct ExperimentConfig {
    std::string model_name = "opinion";
    std::map<std::string, double> model_params;
    SchemeKind scheme = SchemeKind::explicit_em;
    double dt = 0.01;
    std::optional<std::size_t> steps;
    std::optional<double> horizon;
    std::size_t n = 1000;
    std::size_t paths = 100;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    double divergence_threshold = 1e12;
    double implicit_tol = 1e-12;
    std::size_t implicit_max_iter = 100;

    RunKind kind = RunKind::simulate;

    // rate block
    std::vector<double> dt_list{0.005, 0.05, 0.1};
    double window_lo = 0.5;
    double window_hi = 3.0;

    // chaos block
    std::vector<std::size_t> n_list{8, 16, 32, 64, 128, 256};
    std::vector<double> t_eval{1.0};
    std::size_t proxy_factor = 8;

    // check block
    std::vector<AssumptionId> assumptions{AssumptionId::A2_1, AssumptionId::A2_2};
    AssumptionCheckConfig check_cfg;

    // control block
    double delta_obs = 0.05;
    std::optional<double> ctrl_k1, ctrl_k2;

    // figures block
    std::vector<std::string> figure_only;

    std::size_t resolved_steps() const {
        if (steps) return *steps;
        const double h = horizon.value_or(3.0);
        return std::size_t(h / dt + 0.5);
    }

    double resolved_horizon() const { return double(resolved_steps()) * dt; }

    ModelSpec build_model() const {
        std::map<std::string, double> params = model_params;
        if (kind == RunKind::control) {
            params["delta_obs"] = delta_obs;
            if (ctrl_k1) params["k1"] = *ctrl_k1;
            if (ctrl_k2) params["k2"] = *ctrl_k2;
        }
        return make_preset(model_name, params);
    }

    SchemeConfig scheme_config() const {
        SchemeConfig sc;
        sc.kind = scheme;
        sc.dt = dt;
        sc.steps = resolved_steps();
        sc.n = n;
        sc.paths = paths;
        sc.seed = seed;
        sc.divergence_threshold = divergence_threshold;
        sc.implicit_tol = implicit_tol;
        sc.implicit_max_iter = implicit_max_iter;
        return sc;
    }

    void validate() const {
        if (!(dt > 0.0 && dt < 1.0)) throw ConfigError("config field 'dt' must lie in (0, 1)");
        if (steps && horizon)
            throw ConfigError("config fields 'steps' and 'horizon' are mutually exclusive");
        if (resolved_steps() == 0) throw ConfigError("config: zero steps resolved");
        if (n == 0) throw ConfigError("config field 'n' must be >= 1");
        if (paths == 0) throw ConfigError("config field 'paths' must be >= 1");
        try {
            build_model();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config field 'model': ") + e.what());
        }
        switch (kind) {
            case RunKind::rate: {
                if (dt_list.empty()) throw ConfigError("config field 'rate.dt_list' is empty");
                for (double v : dt_list)
                    if (!(v > 0.0 && v < 1.0))
                        throw ConfigError("config field 'rate.dt_list' entries must lie in (0, 1)");
                if (!(window_lo >= 0.0 && window_hi > window_lo))
                    throw ConfigError("config field 'rate.window' must satisfy 0 <= t0 < t1");
                break;
            }
            case RunKind::chaos: {
                if (n_list.empty()) throw ConfigError("config field 'chaos.n_list' is empty");
                for (std::size_t i = 0; i + 1 < n_list.size(); ++i)
                    if (n_list[i] >= n_list[i + 1])
                        throw ConfigError("config field 'chaos.n_list' must be strictly ascending");
                if (t_eval.empty()) throw ConfigError("config field 'chaos.t_eval' is empty");
                for (double t : t_eval)
                    if (!(t > 0.0 && t <= resolved_horizon() + 1e-12))
                        throw ConfigError("config field 'chaos.t_eval' must lie in (0, horizon]");
                break;
            }
            case RunKind::check: {
                if (assumptions.empty())
                    throw ConfigError("config field 'check.assumptions' is empty");
                try {
                    check_cfg.validate();
                } catch (const std::exception& e) {
                    throw ConfigError(std::string("config field 'check': ") + e.what());
                }
                break;
            }
            case RunKind::control: {
                if (model_name != "feedback")
                    throw ConfigError("config: 'control' requires the feedback preset");
                const double ratio = delta_obs / dt;
                const double snapped = std::floor(ratio + 0.5);
                if (snapped < 1.0 || std::fabs(ratio - snapped) > 1e-9 * std::max(1.0, ratio))
                    throw ConfigError(
                        "config field 'control.delta_obs' must be a positive multiple of dt");
                break;
            }
            default: break;
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["model"] = {{"name", model_name}, {"params", nlohmann::json::object()}};
        for (const auto& [k, v] : model_params) j["model"]["params"][k] = v;
        j["scheme"] = to_string(scheme);
        j["dt"] = dt;
        if (steps)
            j["steps"] = *steps;
        else
            j["horizon"] = horizon.value_or(3.0);
        j["n"] = n;
        j["paths"] = paths;
        j["seed"] = seed;
        j["out"] = out_dir;
        j["divergence_threshold"] = divergence_threshold;
        j["implicit_tol"] = implicit_tol;
        j["implicit_max_iter"] = implicit_max_iter;
        switch (kind) {
            case RunKind::simulate: j["simulate"] = nlohmann::json::object(); break;
            case RunKind::rate:
                j["rate"] = {{"dt_list", dt_list}, {"window", {window_lo, window_hi}}};
                break;
            case RunKind::chaos:
                j["chaos"] = {{"n_list", n_list},
                              {"t_eval", t_eval},
                              {"proxy_factor", proxy_factor}};
                break;
            case RunKind::check: {
                nlohmann::json ids = nlohmann::json::array();
                for (AssumptionId id : assumptions) ids.push_back(to_string(id));
                j["check"] = {{"assumptions", ids},
                              {"samples", check_cfg.samples},
                              {"radius", check_cfg.radius},
                              {"atoms", check_cfg.atoms},
                              {"slack", check_cfg.slack}};
                break;
            }
            case RunKind::control: {
                j["control"] = {{"delta_obs", delta_obs}};
                if (ctrl_k1) j["control"]["k1"] = *ctrl_k1;
                if (ctrl_k2) j["control"]["k2"] = *ctrl_k2;
                break;
            }
            default: {
                j["figures"] = nlohmann::json::object();
                if (!figure_only.empty()) j["figures"]["only"] = figure_only;
                break;
            }
        }
        return j;
    }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw ConfigError("config root must be a JSON object");
        detail::require_known_keys(
            j,
            {"model", "scheme", "dt", "steps", "horizon", "n", "paths", "seed", "out",
             "divergence_threshold", "implicit_tol", "implicit_max_iter", "simulate",
             "rate", "chaos", "check", "control", "figures"},
            "$");
        ExperimentConfig cfg;
        if (j.contains("model")) {
            const auto& jm = j.at("model");
            detail::require_known_keys(jm, {"name", "params"}, "model");
            if (jm.contains("name"))
                cfg.model_name = detail::get_as<std::string>(jm, "name", "model");
            if (jm.contains("params")) {
                const auto& jp = jm.at("params");
                if (!jp.is_object())
                    throw ConfigError("config field 'model.params' must be an object");
                for (auto it = jp.begin(); it != jp.end(); ++it) {
                    if (!it.value().is_number())
                        throw ConfigError("config field 'model.params." + it.key() +
                                          "' must be numeric");
                    cfg.model_params[it.key()] = it.value().get<double>();
                }
            }
        }
        if (j.contains("scheme")) {
            try {
                cfg.scheme = scheme_from_string(detail::get_as<std::string>(j, "scheme", "$"));
            } catch (const std::exception& e) {
                throw ConfigError(std::string("config field 'scheme': ") + e.what());
            }
        }
        if (j.contains("dt")) cfg.dt = detail::get_as<double>(j, "dt", "$");
        if (j.contains("steps")) cfg.steps = detail::get_as<std::size_t>(j, "steps", "$");
        if (j.contains("horizon")) cfg.horizon = detail::get_as<double>(j, "horizon", "$");
        if (j.contains("n")) cfg.n = detail::get_as<std::size_t>(j, "n", "$");
        if (j.contains("paths")) cfg.paths = detail::get_as<std::size_t>(j, "paths", "$");
        if (j.contains("seed")) cfg.seed = detail::get_as<std::uint64_t>(j, "seed", "$");
        if (j.contains("out")) cfg.out_dir = detail::get_as<std::string>(j, "out", "$");
        if (j.contains("divergence_threshold"))
            cfg.divergence_threshold = detail::get_as<double>(j, "divergence_threshold", "$");
        if (j.contains("implicit_tol"))
            cfg.implicit_tol = detail::get_as<double>(j, "implicit_tol", "$");
        if (j.contains("implicit_max_iter"))
            cfg.implicit_max_iter = detail::get_as<std::size_t>(j, "implicit_max_iter", "$");

        int blocks = 0;
        for (const char* b : {"simulate", "rate", "chaos", "check", "control", "figures"})
            if (j.contains(b)) ++blocks;
        if (blocks != 1)
            throw ConfigError(
                "config must contain exactly one of the blocks "
                "simulate/rate/chaos/check/control/figures");

        if (j.contains("simulate")) {
            cfg.kind = RunKind::simulate;
            detail::require_known_keys(j.at("simulate"), {}, "simulate");
        } else if (j.contains("rate")) {
            cfg.kind = RunKind::rate;
            const auto& jb = j.at("rate");
            detail::require_known_keys(jb, {"dt_list", "window"}, "rate");
            if (jb.contains("dt_list"))
                cfg.dt_list = detail::get_as<std::vector<double>>(jb, "dt_list", "rate");
            if (jb.contains("window")) {
                const auto w = detail::get_as<std::vector<double>>(jb, "window", "rate");
                if (w.size() != 2)
                    throw ConfigError("config field 'rate.window' must be [t0, t1]");
                cfg.window_lo = w[0];
                cfg.window_hi = w[1];
            }
        } else if (j.contains("chaos")) {
            cfg.kind = RunKind::chaos;
            const auto& jb = j.at("chaos");
            detail::require_known_keys(jb, {"n_list", "t_eval", "proxy_factor"}, "chaos");
            if (jb.contains("n_list"))
                cfg.n_list = detail::get_as<std::vector<std::size_t>>(jb, "n_list", "chaos");
            if (jb.contains("t_eval")) {
                if (jb.at("t_eval").is_number())
                    cfg.t_eval = {jb.at("t_eval").get<double>()};
                else
                    cfg.t_eval = detail::get_as<std::vector<double>>(jb, "t_eval", "chaos");
            }
            if (jb.contains("proxy_factor"))
                cfg.proxy_factor = detail::get_as<std::size_t>(jb, "proxy_factor", "chaos");
        } else if (j.contains("check")) {
            cfg.kind = RunKind::check;
            const auto& jb = j.at("check");
            detail::require_known_keys(jb, {"assumptions", "samples", "radius", "atoms", "slack"},
                                       "check");
            if (jb.contains("assumptions")) {
                cfg.assumptions.clear();
                for (const auto& s :
                     detail::get_as<std::vector<std::string>>(jb, "assumptions", "check")) {
                    try {
                        cfg.assumptions.push_back(assumption_from_string(s));
                    } catch (const std::exception& e) {
                        throw ConfigError(std::string("config field 'check.assumptions': ") +
                                          e.what());
                    }
                }
            }
            if (jb.contains("samples"))
                cfg.check_cfg.samples = detail::get_as<std::size_t>(jb, "samples", "check");
            if (jb.contains("radius"))
                cfg.check_cfg.radius = detail::get_as<double>(jb, "radius", "check");
            if (jb.contains("atoms"))
                cfg.check_cfg.atoms = detail::get_as<std::size_t>(jb, "atoms", "check");
            if (jb.contains("slack"))
                cfg.check_cfg.slack = detail::get_as<double>(jb, "slack", "check");
        } else if (j.contains("control")) {
            cfg.kind = RunKind::control;
            cfg.model_name = "feedback";
            const auto& jb = j.at("control");
            detail::require_known_keys(jb, {"delta_obs", "k1", "k2"}, "control");
            if (jb.contains("delta_obs"))
                cfg.delta_obs = detail::get_as<double>(jb, "delta_obs", "control");
            if (jb.contains("k1")) cfg.ctrl_k1 = detail::get_as<double>(jb, "k1", "control");
            if (jb.contains("k2")) cfg.ctrl_k2 = detail::get_as<double>(jb, "k2", "control");
        } else {
            cfg.kind = RunKind::figures;
            const auto& jb = j.at("figures");
            detail::require_known_keys(jb, {"only"}, "figures");
            if (jb.contains("only"))
                cfg.figure_only =
                    detail::get_as<std::vector<std::string>>(jb, "only", "figures");
        }
        cfg.check_cfg.seed = cfg.seed;
        cfg.validate();
        return cfg;
    }

    static ExperimentConfig load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open config file '" + path + "'");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(is);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("config parse error in '" + path + "': " + e.what());
        }
        return from_json(j);
    }
};

}  // namespace mvsim
