#include "bailout/oracle.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "bailout/copula.hpp"
#include "bailout/errors.hpp"

namespace bailout {

StateKey make_state_key(const MdpState& s) {
    StateKey key;
    key.t = s.t;
    key.defaulted = s.defaulted.mask();
    key.balance.reserve(static_cast<std::size_t>(s.network.size()) * 4);
    for (const BankNode& node : s.network.nodes()) {
        key.balance.push_back(std::llround(node.total_asset * 1e9));
        key.balance.push_back(std::llround(node.equity * 1e9));
        key.balance.push_back(std::llround(node.gov_investment * 1e9));
        key.balance.push_back(node.forced_default ? 1 : 0);
    }
    return key;
}

const OracleEntry& ExactSolution::at(const MdpState& s) const { return table.at(make_state_key(s)); }

std::string ExactSolution::to_tsv() const {
    std::ostringstream out;
    out.precision(17);
    out << "t\tdefaulted\taction\tq\tvalue\n";
    for (const auto& [key, entry] : table) {
        for (std::size_t a = 0; a < entry.labels.size(); ++a) {
            out << key.t << '\t' << entry.state.defaulted.to_string() << '\t' << entry.labels[a] << '\t' << entry.q[a] << '\t'
                << entry.value << '\n';
        }
    }
    return out.str();
}

namespace {

class Solver {
public:
    Solver(const MdpConfig& cfg, ExactSolution& out) : cfg_(cfg), out_(out) {}

    double value(const MdpState& s) {
        if (s.t >= s.horizon) return 0.0;
        StateKey key = make_state_key(s);
        if (auto it = out_.table.find(key); it != out_.table.end()) return it->second.value;

        OracleEntry entry;
        entry.state = s;
        const NodeSet active = s.active();
        const auto ids = active.ids();
        const Eigen::MatrixXd corr = correlation_submatrix(s.network.correlation(), active);
        std::vector<double> totals;
        for (const InvestmentAction& a : enumerate_actions(s, cfg_)) {
            double q = expected_one_step_reward(s, a);
            if (s.t + 1 < s.horizon && !ids.empty() && cfg_.gamma != 0.0) {
                const MdpState post = post_investment(s, a);
                std::vector<double> pds;
                for (int i : ids) pds.push_back(post.network.node(i).pd());
                const std::vector<double> probs = partition_probabilities(pds, corr);
                double continuation = 0.0;
                for (std::size_t mask = 0; mask < probs.size(); ++mask) {
                    if (probs[mask] == 0.0) continue;
                    NodeSet defaults;
                    for (std::size_t b = 0; b < ids.size(); ++b) {
                        if ((mask >> b) & 1U) defaults.insert(ids[b]);
                    }
                    continuation += probs[mask] * value(successor(post, defaults));
                }
                q += cfg_.gamma * continuation;
            }
            entry.labels.push_back(a.label);
            entry.q.push_back(q);
            totals.push_back(a.total());
        }
        entry.best = preferred_max(entry.q, totals);
        entry.value = entry.q[static_cast<std::size_t>(entry.best)];
        const double v = entry.value;
        out_.table.emplace(std::move(key), std::move(entry));
        return v;
    }

private:
    const MdpConfig& cfg_;
    ExactSolution& out_;
};

}  // namespace

ExactSolution solve_exact(const MdpState& s0, const MdpConfig& cfg) {
    cfg.validate();
    if (s0.active().size() > kOracleMaxActiveNodes) {
        throw DimensionError("solve_exact: at most " + std::to_string(kOracleMaxActiveNodes) + " active nodes");
    }
    if (s0.time_to_maturity() > kOracleMaxHorizon) {
        throw DimensionError("solve_exact: at most " + std::to_string(kOracleMaxHorizon) + " steps to maturity");
    }
    ExactSolution out;
    Solver solver(cfg, out);
    solver.value(s0);
    out.root = make_state_key(s0);
    return out;
}

Policy oracle_policy(const ExactSolution& solution, const MdpConfig& cfg) {
    return [&solution, cfg](const MdpState& s) {
        const OracleEntry& entry = solution.at(s);
        for (InvestmentAction& a : enumerate_actions(s, cfg)) {
            if (a.label == entry.labels[static_cast<std::size_t>(entry.best)]) return a;
        }
        throw std::logic_error("oracle_policy: best action not legal in state");
    };
}

}  // namespace bailout

namespace bailout {

MdpState oracle_case(std::uint64_t seed, int index, int horizon, const ToyOptions& options) {
    RandomStream rng = RandomStream(seed, 0x70E).split(static_cast<std::uint64_t>(index));
    const int nodes = 1 + static_cast<int>(rng.next_u64() % 3);
    return random_toy_state(rng, nodes, horizon, options);
}

MdpConfig toy_mdp_config(double gamma) {
    MdpConfig cfg;
    cfg.gamma = gamma;
    cfg.levels_bp = {0, 50, 100, 200};
    cfg.targeting = TargetingMode::kSingleOrAll;
    cfg.risky_threshold = 0.009;
    return cfg;
}

MdpState random_toy_state(RandomStream& rng, int nodes, int horizon, const ToyOptions& options) {
    if (nodes < 1 || nodes > kOracleMaxActiveNodes) throw DimensionError("random_toy_state: 1..3 nodes");
    std::vector<BankNode> banks(static_cast<std::size_t>(nodes));
    const double alpha = std::exp(std::log(0.001) + rng.uniform() * (std::log(0.05) - std::log(0.001)));
    for (int i = 0; i < nodes; ++i) {
        BankNode& b = banks[static_cast<std::size_t>(i)];
        b.label = std::to_string(i + 1);
        b.total_asset = 100.0;
        b.equity = 2.0 + 4.0 * rng.uniform();
        b.lgd = 0.3 + 0.7 * rng.uniform();
        b.alpha = alpha;
        b.gov_investment = rng.uniform() < 0.3 ? rng.uniform() : 0.0;
        // Node 0 is always risky so the action set is never trivial.
        const double pd0 = i == 0 ? 0.01 + 0.04 * rng.uniform() : 0.002 + 0.03 * rng.uniform();
        b.sigma = calibrate_sigma(b.total_asset, b.equity, 0.0, pd0);
    }
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(nodes, nodes);
    for (int i = 0; i < nodes; ++i) {
        for (int j = 0; j < nodes; ++j) {
            if (i != j && rng.uniform() < options.link_probability) w(i, j) = options.max_exposure * rng.uniform();
        }
    }
    const double rho = 0.7 * rng.uniform();
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(nodes, nodes, rho);
    sigma.diagonal().setOnes();
    return initial_state(FinancialNetwork(std::move(banks), std::move(w), std::move(sigma)), horizon);
}

OracleComparison compare_with_oracle(const MdpState& s0, const MdpConfig& cfg, const SolverConfig& solver) {
    OracleComparison out;
    const ExactSolution exact = solve_exact(s0, cfg);
    out.reachable_states = exact.reachable_states();
    const OracleEntry& root = exact.root_entry();
    out.labels = root.labels;
    out.exact_q = root.q;
    out.exact_value = root.value;
    out.exact_best = root.best;

    const PolicyFit fit = s0.time_to_maturity() >= 2 ? fit_policy(s0, cfg, solver) : PolicyFit::initial(s0.network.size(), s0.horizon);
    const QTable table = q_table(s0, fit, cfg, solver.evaluation_samples(), RandomStream(solver.seed, 0x0AC1E));
    out.fvi_best = table.best;
    const double tolerance = 0.02 * std::abs(out.exact_value) + 1e-6;
    for (std::size_t a = 0; a < table.entries.size(); ++a) {
        const ActionValue& e = table.entries[a];
        if (e.action.label != out.labels[a]) throw std::logic_error("compare_with_oracle: action order differs");
        out.fvi_q.push_back(e.q);
        out.fvi_se.push_back(e.std_error);
        const double err = std::abs(e.q - out.exact_q[a]);
        out.max_abs_error = std::max(out.max_abs_error, err);
        if (err > std::max(3.0 * e.std_error, tolerance)) out.values_ok = false;
    }
    if (out.fvi_best != out.exact_best) {
        // Only a disagreement when the exact gap is resolvable by the sampler.
        const auto b = static_cast<std::size_t>(out.exact_best);
        double runner_up = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < out.exact_q.size(); ++a) {
            if (a != b) runner_up = std::max(runner_up, out.exact_q[a]);
        }
        const double se = std::max(table.difference_std_error(out.fvi_best, out.exact_best), 1e-15);
        if (out.exact_q[b] - runner_up > 4.0 * se) out.argmax_ok = false;
    }

    for (const auto& [key, entry] : exact.table) {
        if (entry.state.t != entry.state.horizon - 1) continue;
        const QTable last = q_table(entry.state, fit, cfg, solver.evaluation_samples(), RandomStream(solver.seed, 0x7E));
        for (std::size_t a = 0; a < last.entries.size(); ++a) {
            if (std::abs(last.entries[a].q - entry.q[a]) > 1e-12 || last.entries[a].std_error != 0.0) out.terminal_ok = false;
        }
    }
    return out;
}

}  // namespace bailout
