#pragma once

#include <map>
#include <string>
#include <vector>

#include "bailout/fvi.hpp"
#include "bailout/mdp.hpp"
#include "bailout/random.hpp"

namespace bailout {

// Canonical key of an enumerated state: time, defaulted set and balance
// sheets quantised at 1e-9.
struct StateKey {
    int t = 0;
    std::uint64_t defaulted = 0;
    std::vector<long long> balance;  // (W, E, J, forced) per node

    auto operator<=>(const StateKey&) const = default;
};

StateKey make_state_key(const MdpState& s);

struct OracleEntry {
    MdpState state;
    double value = 0.0;                    // V*
    std::vector<std::string> labels;       // legal actions, enumeration order
    std::vector<double> q;                 // Q*(s, a) per action
    int best = 0;
};

struct ExactSolution {
    std::map<StateKey, OracleEntry> table;
    StateKey root;

    const OracleEntry& at(const MdpState& s) const;  // throws std::out_of_range
    const OracleEntry& root_entry() const { return table.at(root); }
    std::size_t reachable_states() const { return table.size(); }

    // Tab-separated dump: t, defaulted, action, Q*, V*, one row per (state, action).
    std::string to_tsv() const;
};

inline constexpr int kOracleMaxActiveNodes = 3;
inline constexpr int kOracleMaxHorizon = 5;

// Backward induction over every state reachable from s0. Transition
// probabilities come from the exact rectangle integrals; the expected
// immediate reward uses the closed form (linearity of expectation).
ExactSolution solve_exact(const MdpState& s0, const MdpConfig& cfg);

// Greedy policy read from the table (states must be covered).
Policy oracle_policy(const ExactSolution& solution, const MdpConfig& cfg);

// Random toy instance for oracle comparisons: `nodes` banks (<= 3), node 1
// always risky, horizon `horizon`. Exposures are drawn in
// [0, max_exposure] with W = 100 and E in [2, 6].
struct ToyOptions {
    double max_exposure = 1.0;
    double link_probability = 0.7;
};
MdpState random_toy_state(RandomStream& rng, int nodes, int horizon, const ToyOptions& options = {});
MdpConfig toy_mdp_config(double gamma = 0.95);

// Case `index` of the seeded toy family used by oracle checks: 1 to 3 nodes
// drawn from the case's own stream, then random_toy_state.
MdpState oracle_case(std::uint64_t seed, int index, int horizon, const ToyOptions& options = {});

struct OracleComparison {
    std::vector<std::string> labels;
    std::vector<double> exact_q;
    std::vector<double> fvi_q;
    std::vector<double> fvi_se;
    double exact_value = 0.0;
    int exact_best = 0;
    int fvi_best = 0;
    double max_abs_error = 0.0;
    bool values_ok = true;      // every |dQ| within max(3 se, 2% |V*| + 1e-6)
    bool argmax_ok = true;      // argmax agrees unless the exact top-two gap is within 4 se
    bool terminal_ok = true;    // t = M-1 Q values agree to 1e-12
    std::size_t reachable_states = 0;
};

// Fits FVI on s0, evaluates Q at s0 and compares with solve_exact. Also
// checks exactness of every one-step-to-maturity state in the table.
OracleComparison compare_with_oracle(const MdpState& s0, const MdpConfig& cfg, const SolverConfig& solver);

}  // namespace bailout
