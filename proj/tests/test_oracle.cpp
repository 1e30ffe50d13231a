#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "bailout/errors.hpp"
#include "bailout/oracle.hpp"

using namespace bailout;

namespace {

BankNode bank(double w, double e, double pd0, double alpha, double j = 0.0, double lgd = 1.0) {
    BankNode n;
    n.total_asset = w;
    n.equity = e;
    n.alpha = alpha;
    n.lgd = lgd;
    n.gov_investment = j;
    n.sigma = calibrate_sigma(w, e, 0.0, pd0);
    return n;
}

MdpState single(double alpha, int horizon) {
    return initial_state(FinancialNetwork({bank(100, 3, 0.02, alpha, 0.5, 0.6)}, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Identity(1, 1)),
                         horizon);
}

MdpState pair(double alpha, double j, double lgd, int horizon = 3) {
    Eigen::MatrixXd w(2, 2);
    w << 0, 0.8, 1.2, 0;
    Eigen::MatrixXd c(2, 2);
    c << 1, 0.4, 0.4, 1;
    return initial_state(FinancialNetwork({bank(100, 3, 0.02, alpha, j, lgd), bank(100, 4, 0.015, alpha, j, lgd)}, w, c), horizon);
}

}  // namespace

TEST_CASE("single node without choices has a geometric closed form") {
    MdpConfig cfg = toy_mdp_config(0.9);
    cfg.levels_bp = {0};
    for (int m = 1; m <= 4; ++m) {
        const MdpState s = single(0.01, m);
        const ExactSolution sol = solve_exact(s, cfg);
        const BankNode& n = s.network.node(0);
        const double p = n.pd(), l = taxpayer_loss(n);
        double want = 0.0;
        for (int k = 0; k < m; ++k) want -= std::pow(0.9 * (1.0 - p), k) * p * l;
        CHECK(sol.root_entry().value == doctest::Approx(want).epsilon(1e-12));
        // Survival path plus an absorbed state at every later step.
        CHECK(sol.reachable_states() == static_cast<std::size_t>(2 * m - 1));
    }
}

TEST_CASE("single node with an injection at the last step") {
    MdpConfig cfg = toy_mdp_config(0.9);
    const MdpState s = single(0.02, 1);
    const ExactSolution sol = solve_exact(s, cfg);
    const OracleEntry& root = sol.root_entry();
    REQUIRE(root.labels.size() == cfg.levels_bp.size());
    for (std::size_t a = 0; a < root.labels.size(); ++a) {
        const InvestmentAction act = enumerate_actions(s, cfg)[a];
        CHECK(root.q[a] == doctest::Approx(expected_one_step_reward(s, act)).epsilon(1e-12));
    }
}

TEST_CASE("value is monotone in alpha") {
    const MdpConfig cfg = toy_mdp_config();
    double prev = 0.0;
    for (double alpha : {0.0, 0.001, 0.005, 0.02, 0.05}) {
        const double v = solve_exact(pair(alpha, 0.3, 0.6), cfg).root_entry().value;
        CHECK(v <= prev + 1e-15);
        prev = v;
    }
}

TEST_CASE("no alpha and no stakes makes intervention unattractive") {
    const MdpConfig cfg = toy_mdp_config();
    const ExactSolution sol = solve_exact(pair(0.0, 0.0, 1.0), cfg);
    const OracleEntry& root = sol.root_entry();
    CHECK(root.labels[static_cast<std::size_t>(root.best)] == "0@0");
    double best_other = -1e300;
    for (std::size_t a = 1; a < root.q.size(); ++a) best_other = std::max(best_other, root.q[a]);
    CHECK(best_other - root.q[0] < 0.0);
}

TEST_CASE("following the table policy earns V* on average") {
    const MdpConfig cfg = toy_mdp_config();
    const MdpState s0 = pair(0.02, 0.3, 0.6);
    const ExactSolution sol = solve_exact(s0, cfg);
    const Policy policy = oracle_policy(sol, cfg);
    RandomStream rng(12);
    const int n = 200'000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = simulate_episode(s0, policy, cfg.gamma, rng).cumulative_reward;
        sum += r;
        sq += r * r;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    CHECK(std::abs(mean - sol.root_entry().value) <= 3.5 * se);
}

TEST_CASE("state keys and limits") {
    const MdpState a = pair(0.01, 0.0, 1.0);
    MdpState b = a;
    CHECK(make_state_key(a) == make_state_key(b));
    b.network.node(0).equity += 1e-6;
    CHECK(make_state_key(a) != make_state_key(b));
    b = a;
    b.t = 1;
    CHECK(make_state_key(a) != make_state_key(b));

    const MdpConfig cfg = toy_mdp_config();
    RandomStream rng(3);
    CHECK_THROWS_AS(solve_exact(random_toy_state(rng, 3, kOracleMaxHorizon + 1), cfg), DimensionError);
    FinancialNetwork four({bank(100, 3, 0.02, 0.01), bank(100, 3, 0.02, 0.01), bank(100, 3, 0.02, 0.01), bank(100, 3, 0.02, 0.01)},
                          Eigen::MatrixXd::Zero(4, 4), Eigen::MatrixXd::Identity(4, 4));
    CHECK_THROWS_AS(solve_exact(initial_state(four, 2), cfg), DimensionError);
}

TEST_CASE("toy generator") {
    RandomStream rng(4);
    for (int i = 0; i < 50; ++i) {
        const int nodes = 1 + i % 3;
        const MdpState s = random_toy_state(rng, nodes, 3);
        CHECK(s.network.size() == nodes);
        CHECK(s.horizon == 3);
        CHECK(risky_nodes(s.network, s.active(), toy_mdp_config().risky_threshold).contains(0));
        CHECK(enumerate_actions(s, toy_mdp_config()).size() >= 2);
        for (int a = 0; a < nodes; ++a) {
            for (int b = 0; b < nodes; ++b) CHECK(s.network.exposure(a, b) <= 1.0);
        }
    }
}

TEST_CASE("tsv dump has one row per state and action") {
    const MdpConfig cfg = toy_mdp_config();
    const ExactSolution sol = solve_exact(pair(0.01, 0.2, 0.6), cfg);
    std::size_t rows = 0;
    for (const auto& [key, entry] : sol.table) rows += entry.labels.size();
    const std::string tsv = sol.to_tsv();
    CHECK(static_cast<std::size_t>(std::count(tsv.begin(), tsv.end(), '\n')) == rows + 1);  // plus header
}

TEST_CASE("FVI agrees with the oracle when the continuation is exact") {
    // With two steps the continuation is the exact terminal value, so only
    // Monte Carlo error separates the two solvers.
    SolverConfig solver;
    solver.n_bellman = 20000;
    const OracleComparison cmp = compare_with_oracle(pair(0.02, 0.3, 0.6, 2), toy_mdp_config(), solver);
    for (std::size_t a = 0; a < cmp.labels.size(); ++a) {
        INFO(cmp.labels[a], " exact ", cmp.exact_q[a], " fvi ", cmp.fvi_q[a], " se ", cmp.fvi_se[a]);
        CHECK(std::abs(cmp.exact_q[a] - cmp.fvi_q[a]) <= std::max(3.0 * cmp.fvi_se[a], 0.02 * std::abs(cmp.exact_value) + 1e-6));
    }
    CHECK(cmp.values_ok);
    CHECK(cmp.argmax_ok);
    CHECK(cmp.terminal_ok);
}
