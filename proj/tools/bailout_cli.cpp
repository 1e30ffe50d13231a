// Command-line driver: fit, evaluate, sweep-alpha, oracle-check.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "bailout/errors.hpp"
#include "bailout/experiment.hpp"
#include "bailout/oracle.hpp"
#include "bailout/policy_io.hpp"

namespace {

using namespace bailout;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> network;
    std::optional<std::string> scenario;
    std::optional<std::int64_t> samples;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "experiment config (JSON); defaults apply when omitted");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--network", f.network, "builtin:kk | builtin:eba | network JSON path");
    cmd->add_option("--scenario", f.scenario, "baseline | half-equity");
    cmd->add_option("--samples", f.samples, "Monte Carlo draws per Bellman backup and per evaluation");
}

ExperimentConfig resolve(const CommonFlags& f) {
    ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_experiment_config(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (f.out) cfg.out_dir = *f.out;
    if (f.network) cfg.network = *f.network;
    if (f.scenario) cfg.scenario = *f.scenario;
    if (f.samples) {
        cfg.solver.n_bellman = *f.samples;
        cfg.solver.n_evaluation = *f.samples;
    }
    cfg.solver.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

void print_paths(const std::vector<std::string>& paths) {
    for (const std::string& p : paths) std::cout << "wrote " << p << '\n';
}

int run_fit(const CommonFlags& f, std::optional<double> alpha) {
    const ExperimentConfig cfg = resolve(f);
    const double a = alpha.value_or(cfg.alphas.front());
    PolicyFit fit = fit_policy(build_initial_state(cfg, a), cfg.mdp, cfg.solver);
    fit.config_hash = config_hash(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    const std::string path = (std::filesystem::path(cfg.out_dir) / "policy_fit.json").string();
    save_policy_fit(fit, path);
    for (std::size_t t = 0; t < fit.beta.size(); ++t) {
        std::printf("t=%zu lambda=%.3g cv_r2=%.4f rows=%d negative_beta=%d%s\n", t, fit.lambda[t], fit.cv_r2[t],
                    fit.portfolio_size[t], fit.negative_coefficients[t], fit.underdetermined[t] ? " (underdetermined)" : "");
    }
    std::cout << "wrote " << path << '\n';
    return 0;
}

int run_evaluate(const CommonFlags& f, const std::string& policy_path) {
    ExperimentConfig cfg = resolve(f);
    if (!policy_path.empty()) {
        // Evaluate a saved fit at its single alpha (the config's first).
        const PolicyFit fit = load_policy_fit(policy_path);
        const MdpState s0 = build_initial_state(cfg, cfg.alphas.front());
        if (fit.horizon != s0.horizon || fit.num_nodes != s0.network.size()) {
            throw ConfigError("policy fit does not match the configured network or horizon");
        }
        const QTable table = q_table(s0, fit, cfg.mdp, cfg.solver.evaluation_samples(), RandomStream(cfg.seed, 0xE7A1));
        std::printf("action,q,std_error\n");
        for (const ActionValue& e : table.entries) std::printf("%s,%.10g,%.3g\n", e.action.label.c_str(), e.q, e.std_error);
        std::printf("best,%s\n", table.entries[static_cast<std::size_t>(table.best)].action.label.c_str());
        return 0;
    }
    cfg.alpha_search.iterations = 0;
    const ExperimentResult result = run_experiment(cfg);
    for (const QRow& r : result.q_rows) {
        if (r.best) std::printf("alpha=%g time_to_end=%d best=%s q=%.6g se=%.2g\n", r.alpha, r.time_to_end, r.action.c_str(), r.q, r.std_error);
    }
    print_paths(write_experiment(result, cfg));
    return 0;
}

int run_sweep(const CommonFlags& f, std::optional<int> iterations) {
    ExperimentConfig cfg = resolve(f);
    cfg.time_curves = false;
    if (iterations) cfg.alpha_search.iterations = *iterations;
    const ExperimentResult result = run_experiment(cfg);
    for (const ConvenienceRow& r : result.alpha_sweep) {
        std::printf("alpha=%-10.4g convenience=%+.6g se=%.2g best_nontrivial=%s\n", r.alpha, r.value, r.std_error, r.best_label.c_str());
    }
    if (result.alpha_c.bracketed) {
        std::printf("alpha_c in [%.6g, %.6g]\n", result.alpha_c.lo, result.alpha_c.hi);
    } else {
        std::printf("alpha_c not bracketed by the sweep\n");
    }
    print_paths(write_experiment(result, cfg));
    return 0;
}

int run_oracle_check(const CommonFlags& f, int cases, int horizon, bool verbose, const ToyOptions& toy) {
    ExperimentConfig base = f.config.empty() ? ExperimentConfig{} : load_experiment_config(f.config);
    SolverConfig solver = base.solver;
    solver.seed = f.seed.value_or(base.seed);
    if (f.samples) {
        solver.n_bellman = *f.samples;
        solver.n_evaluation = *f.samples;
    }
    const MdpConfig cfg = toy_mdp_config();
    int failures = 0;
    std::ostringstream tables;
    for (int c = 0; c < cases; ++c) {
        const MdpState s0 = oracle_case(solver.seed, c, horizon, toy);
        const int nodes = s0.network.size();
        const OracleComparison cmp = compare_with_oracle(s0, cfg, solver);
        const bool ok = cmp.values_ok && cmp.argmax_ok && cmp.terminal_ok;
        failures += ok ? 0 : 1;
        std::printf("case %2d nodes=%d states=%zu V*=%.6g max|dQ|=%.3g best exact=%s fvi=%s %s\n", c, nodes, cmp.reachable_states,
                    cmp.exact_value, cmp.max_abs_error, cmp.labels[static_cast<std::size_t>(cmp.exact_best)].c_str(),
                    cmp.labels[static_cast<std::size_t>(cmp.fvi_best)].c_str(), ok ? "ok" : "MISMATCH");
        if (verbose || !ok) {
            for (std::size_t a = 0; a < cmp.labels.size(); ++a) {
                std::printf("    %-6s exact=%.8g fvi=%.8g se=%.2g\n", cmp.labels[a].c_str(), cmp.exact_q[a], cmp.fvi_q[a], cmp.fvi_se[a]);
            }
        }
        if (f.out) tables << "# case " << c << '\n' << solve_exact(s0, cfg).to_tsv();
    }
    if (f.out) {
        std::filesystem::create_directories(*f.out);
        const std::string path = (std::filesystem::path(*f.out) / "oracle_tables.tsv").string();
        std::ofstream(path) << tables.str();
        std::cout << "wrote " << path << '\n';
    }
    std::printf("%d/%d cases agree\n", cases - failures, cases);
    return failures == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bank bailout MDP: fitted value iteration and exact checks"};
    app.require_subcommand(1);
    CommonFlags flags;

    std::optional<double> fit_alpha;
    auto* fit = app.add_subcommand("fit", "fit value-function coefficients and save them as JSON");
    add_common(fit, flags);
    fit->add_option("--alpha", fit_alpha, "taxpayer-loss fraction (default: first alpha of the config)");

    std::string policy_path;
    auto* evaluate = app.add_subcommand("evaluate", "Q values and Convenience per alpha and time to end");
    add_common(evaluate, flags);
    evaluate->add_option("--policy", policy_path, "evaluate a saved fit instead of fitting");

    std::optional<int> iterations;
    auto* sweep = app.add_subcommand("sweep-alpha", "Convenience at t=0 across alpha and the alpha_c interval");
    add_common(sweep, flags);
    sweep->add_option("--bisect", iterations, "bisection steps after the sweep");

    int cases = 20, toy_horizon = 3;
    auto* oracle = app.add_subcommand("oracle-check", "compare FVI with exact dynamic programming on random toys");
    add_common(oracle, flags);
    oracle->add_option("--cases", cases, "number of random toy networks")->check(CLI::PositiveNumber);
    oracle->add_option("--horizon", toy_horizon, "toy horizon (1..5)")->check(CLI::Range(1, 5));
    bool verbose = false;
    ToyOptions toy;
    oracle->add_option("--max-exposure", toy.max_exposure, "largest toy exposure w_ij (equity is 2..6)");
    oracle->add_flag("--verbose", verbose, "print every action's Q");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        if (*fit) return run_fit(flags, fit_alpha);
        if (*evaluate) return run_evaluate(flags, policy_path);
        if (*sweep) return run_sweep(flags, iterations);
        if (*oracle) return run_oracle_check(flags, cases, toy_horizon, verbose, toy);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
