#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bailout/mdp.hpp"
#include "bailout/random.hpp"
#include "bailout/ridge.hpp"
#include "bailout/z_features.hpp"

namespace bailout {

struct SolverConfig {
    std::int64_t n_bellman = 20'000;     // latent draws per Bellman backup
    std::int64_t n_evaluation = -1;      // draws for Q* at evaluation time; < 0 uses n_bellman
    int multi_default_states = -1;       // < 0 means 2N
    int max_forced_defaults = 4;
    int action_variants = -1;            // < 0 means N
    std::vector<double> lambda_grid = default_lambda_grid();
    int folds = 5;
    bool shrink_to_ones = true;          // ridge pulls beta toward the all-ones start instead of 0
    RidgeScaling feature_scaling = RidgeScaling::kGlobal;
    std::uint64_t seed = 1;

    void validate() const;  // throws ConfigError
    std::int64_t evaluation_samples() const { return n_evaluation < 0 ? n_bellman : n_evaluation; }
};

// Fitted value-function coefficients. beta[t] (t = 0..M-2) is N x (M - t);
// one step before maturity the value is computed exactly and needs none.
struct PolicyFit {
    static constexpr int kFormatVersion = 1;

    int horizon = 0;
    int num_nodes = 0;
    std::vector<Eigen::MatrixXd> beta;
    std::vector<bool> fitted;
    std::vector<double> lambda;
    std::vector<double> cv_r2;
    std::vector<int> portfolio_size;
    std::vector<int> negative_coefficients;
    std::vector<bool> underdetermined;
    std::uint64_t seed = 0;
    std::string config_hash;

    // All-ones coefficients, nothing fitted yet.
    static PolicyFit initial(int num_nodes, int horizon);
};

// max_a of the closed-form one-step reward: the exact value one step before maturity.
double terminal_value(const MdpState& s, const MdpConfig& cfg);

// 0 at maturity, terminal_value() one step before, -sum beta_t Zbar otherwise.
double approximate_value(const MdpState& s, const PolicyFit& fit, const MdpConfig& cfg);

struct ActionValue {
    InvestmentAction action;
    double immediate = 0.0;     // closed-form expected one-step reward
    double continuation = 0.0;  // Monte Carlo mean of the next-state value
    double q = 0.0;
    double std_error = 0.0;
};

// Q estimates for every legal action at one state. The same latent draws
// are used for all actions, so differences between entries have far lower
// variance than the entries themselves.
struct QTable {
    std::vector<ActionValue> entries;
    int best = 0;
    std::int64_t samples = 0;
    double discount = 0.0;
    std::vector<std::vector<double>> continuation_samples;  // per action; empty when exact

    int index_of(const std::string& label) const;  // -1 when absent
    // Standard error of Q(a) - Q(b) from the paired draws.
    double difference_std_error(int a, int b) const;
};

QTable q_table(const MdpState& s, const PolicyFit& fit, const MdpConfig& cfg, std::int64_t samples, RandomStream rng);

struct BellmanResult {
    double value = 0.0;
    int action_index = 0;
    QTable table;
};

BellmanResult bellman_value(const MdpState& s, const PolicyFit& fit, const MdpConfig& cfg, const SolverConfig& solver,
                            RandomStream rng);

struct QEstimate {
    double q = 0.0;
    double std_error = 0.0;
};

QEstimate q_star(const MdpState& s, const InvestmentAction& a, const PolicyFit& fit, const MdpConfig& cfg,
                 const SolverConfig& solver, RandomStream rng);

std::pair<InvestmentAction, QTable> optimal_action(const MdpState& s, const PolicyFit& fit, const MdpConfig& cfg,
                                                   const SolverConfig& solver, RandomStream rng);

struct ConvenienceEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::string best_label = "0@0";
};

// Best non-trivial Q minus the no-op Q (0 when no investment is possible).
ConvenienceEstimate convenience(const MdpState& s, const PolicyFit& fit, const MdpConfig& cfg, const SolverConfig& solver,
                                RandomStream rng);
ConvenienceEstimate convenience_from(const QTable& table);

// Draws a set of 2..max_size nodes from `candidates` where each set U has
// probability proportional to exp(-|U|). Sets with a single node are
// included when `min_size` is 1.
NodeSet sample_forced_set(NodeSet candidates, int max_size, RandomStream& rng, int min_size = 2);

// Regression states for time t: s0 moved to maturity M - t with forced
// default sets (none, every single node, random multi-node sets) plus states
// obtained by applying an investment to s0 first.
std::vector<MdpState> representative_portfolio(const MdpState& s0, int t, const MdpConfig& cfg, const SolverConfig& solver,
                                               RandomStream rng);

// Backward fit of beta_t for t = M-2 .. 0.
PolicyFit fit_policy(const MdpState& s0, const MdpConfig& cfg, const SolverConfig& solver);

}  // namespace bailout
