#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bailout/data_sources.hpp"
#include "bailout/fvi.hpp"
#include "bailout/mdp.hpp"

namespace bailout {

struct AlphaSearch {
    int iterations = 0;        // bisection steps on the t = 0 Convenience sign; 0 disables
    double gate_std_errors = 3.0;
};

struct ExperimentConfig {
    std::string network = "builtin:kk";  // builtin:kk | builtin:eba | path to a network JSON file
    std::string scenario = "baseline";   // baseline | half-equity
    std::map<int, double> preset_investment;  // 0-based node id -> J_i(0)
    bool kite_complete_exposures = false;
    double correlation = 0.5;               // builtin networks only
    EbaOptions eba;
    MdpConfig mdp;
    SolverConfig solver;
    std::vector<double> alphas = {0.0001, 0.001, 0.01};
    bool time_curves = true;                // Q and Convenience for every time to end
    AlphaSearch alpha_search;
    std::uint64_t seed = 1;
    std::string out_dir = "results";

    void validate() const;  // throws ConfigError
};

// Unknown keys are rejected so typos do not silently fall back to defaults.
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::string& path);
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);

// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

// Network for the config with every alpha_i set to `alpha`.
FinancialNetwork build_network(const ExperimentConfig& cfg, double alpha);
MdpState build_initial_state(const ExperimentConfig& cfg, double alpha);

struct QRow {
    double alpha = 0.0;
    int time_to_end = 0;
    std::string action;
    double q = 0.0;
    double std_error = 0.0;
    bool best = false;
};

struct ConvenienceRow {
    double alpha = 0.0;
    int time_to_end = 0;
    double value = 0.0;
    double std_error = 0.0;
    std::string best_label;
};

struct AlphaInterval {
    bool bracketed = false;  // a sign change was found in the sweep
    double lo = 0.0;         // Convenience < 0 beyond the gate here
    double hi = 0.0;         // Convenience > 0 beyond the gate here
    int evaluations = 0;
};

struct ExperimentResult {
    std::vector<QRow> q_rows;                  // every alpha, every time to end
    std::vector<ConvenienceRow> convenience;   // every alpha, every time to end
    std::vector<ConvenienceRow> alpha_sweep;   // t = 0, sweep plus bisection points, sorted by alpha
    AlphaInterval alpha_c;
    std::vector<PolicyFit> fits;               // one per alpha in cfg.alphas
    std::string config_hash;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Writes q_values.csv, convenience.csv, alpha_sweep.csv and summary.csv into
// cfg.out_dir (created if missing). Returns the written paths.
std::vector<std::string> write_experiment(const ExperimentResult& result, const ExperimentConfig& cfg);

// Fits and evaluates one alpha; exposed for the CLI and tests.
struct AlphaEvaluation {
    PolicyFit fit;
    std::vector<QRow> q_rows;
    std::vector<ConvenienceRow> convenience;
};
AlphaEvaluation evaluate_alpha(const ExperimentConfig& cfg, double alpha, bool time_curves);

}  // namespace bailout
