#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <mvsim/runner.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

struct CliOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    bool print_config = false;
};

mvsim::ExperimentConfig default_config(mvsim::RunKind kind) {
    mvsim::ExperimentConfig cfg;
    cfg.kind = kind;
    if (kind == mvsim::RunKind::control) cfg.model_name = "feedback";
    return cfg;
}

int run_command(mvsim::RunKind kind, const CliOptions& opts) {
    try {
        mvsim::ExperimentConfig cfg = opts.config.empty()
                                          ? default_config(kind)
                                          : mvsim::ExperimentConfig::load(opts.config);
        if (cfg.kind != kind)
            throw mvsim::ConfigError(std::string("config declares a '") +
                                     mvsim::to_string(cfg.kind) +
                                     "' block but the subcommand is '" +
                                     mvsim::to_string(kind) + "'");
        if (opts.seed) {
            cfg.seed = *opts.seed;
            cfg.check_cfg.seed = *opts.seed;
        }
        if (!opts.out.empty()) cfg.out_dir = opts.out;
        cfg.validate();
        if (opts.threads > 0) {
#ifdef _OPENMP
            omp_set_num_threads(opts.threads);
#endif
        }
        if (opts.print_config) {
            std::cout << cfg.to_json().dump(2) << "\n";
            return 0;
        }
        const mvsim::RunSummary sum = mvsim::run(cfg);
        std::cout << sum.message << "\n";
        for (const std::string& f : sum.files) std::cout << "wrote " << f << "\n";
        return sum.exit_code;
    } catch (const mvsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const mvsim::ImplicitSolveFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mvsim: particle simulation of distribution-dependent SDEs\n"
                 "exit codes: 0 success (divergence is a recorded result), 1 config "
                 "error, 2 numerical failure, 3 failed assumption check"};
    app.require_subcommand(1);

    CliOptions opts;
    const std::pair<const char*, mvsim::RunKind> kinds[] = {
        {"simulate", mvsim::RunKind::simulate}, {"rate", mvsim::RunKind::rate},
        {"chaos", mvsim::RunKind::chaos},       {"check", mvsim::RunKind::check},
        {"control", mvsim::RunKind::control},   {"figures", mvsim::RunKind::figures}};
    for (const auto& [name, kind] : kinds) {
        CLI::App* sub = app.add_subcommand(
            name, std::string("run the ") + name + " experiment block");
        sub->add_option("--config", opts.config, "JSON experiment config file");
        sub->add_option("--out", opts.out, "output directory (overrides config)");
        sub->add_option("--seed", opts.seed, "RNG seed (overrides config)");
        sub->add_option("--threads", opts.threads, "worker thread count");
        sub->add_flag("--print-config", opts.print_config,
                      "print the fully resolved config and exit");
        const mvsim::RunKind k = kind;
        sub->callback([&opts, k]() { std::exit(run_command(k, opts)); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    return 0;
}
