#include "bailout/fvi.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "bailout/errors.hpp"

namespace bailout {

void SolverConfig::validate() const {
    if (n_bellman < 1000) throw ConfigError("n_bellman must be at least 1000");
    if (n_evaluation >= 0 && n_evaluation < 1000) throw ConfigError("n_evaluation must be at least 1000");
    if (folds != 5) throw ConfigError("cross-validation uses exactly 5 folds");
    if (max_forced_defaults < 2) throw ConfigError("max_forced_defaults must be at least 2");
    if (lambda_grid.empty()) throw ConfigError("lambda grid must not be empty");
    for (double l : lambda_grid) {
        if (!(l > 0.0)) throw ConfigError("lambda grid entries must be positive");
    }
}

PolicyFit PolicyFit::initial(int num_nodes, int horizon) {
    PolicyFit fit;
    fit.horizon = horizon;
    fit.num_nodes = num_nodes;
    for (int t = 0; t + 1 < horizon; ++t) fit.beta.push_back(Eigen::MatrixXd::Ones(num_nodes, horizon - t));
    const auto steps = fit.beta.size();
    fit.fitted.assign(steps, false);
    fit.lambda.assign(steps, 0.0);
    fit.cv_r2.assign(steps, 0.0);
    fit.portfolio_size.assign(steps, 0);
    fit.negative_coefficients.assign(steps, 0);
    fit.underdetermined.assign(steps, false);
    return fit;
}

double terminal_value(const MdpState& s, const MdpConfig& cfg) {
    const auto actions = enumerate_actions(s, cfg);
    std::vector<double> values, totals;
    for (const InvestmentAction& a : actions) {
        values.push_back(expected_one_step_reward(s, a));
        totals.push_back(a.total());
    }
    return values[static_cast<std::size_t>(preferred_max(values, totals))];
}

double approximate_value(const MdpState& s, const PolicyFit& fit, const MdpConfig& cfg) {
    if (s.t >= s.horizon) return 0.0;
    if (s.t == s.horizon - 1) return terminal_value(s, cfg);
    if (fit.horizon != s.horizon || fit.num_nodes != s.network.size()) {
        throw DimensionError("approximate_value: policy fit does not match the state's network or horizon");
    }
    if (s.active().empty()) return 0.0;
    return value_approx(greedy_action_sequence(s, cfg), fit.beta[static_cast<std::size_t>(s.t)]);
}

int QTable::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].action.label == label) return static_cast<int>(i);
    }
    return -1;
}

double QTable::difference_std_error(int a, int b) const {
    if (continuation_samples.empty() || samples < 2) return 0.0;
    const auto& x = continuation_samples[static_cast<std::size_t>(a)];
    const auto& y = continuation_samples[static_cast<std::size_t>(b)];
    double mean = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) mean += x[i] - y[i];
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(x.size() - 1);
    return discount * std::sqrt(var / static_cast<double>(x.size()));
}

QTable q_table(const MdpState& s, const PolicyFit& fit, const MdpConfig& cfg, std::int64_t samples, RandomStream rng) {
    if (s.t >= s.horizon) throw EpisodeOverError("q_table: episode is over");
    QTable table;
    std::vector<double> totals;
    for (InvestmentAction& a : enumerate_actions(s, cfg)) {
        ActionValue entry;
        entry.immediate = expected_one_step_reward(s, a);
        entry.q = entry.immediate;
        totals.push_back(a.total());
        entry.action = std::move(a);
        table.entries.push_back(std::move(entry));
    }
    const NodeSet active = s.active();
    const bool exact = s.t + 1 >= s.horizon || cfg.gamma == 0.0 || active.empty();
    if (!exact) {
        if (samples < 2) throw ConfigError("q_table: at least two samples required");
        const CorrelationFactor factor = factor_for(s.network.correlation(), active);
        const auto dim = static_cast<std::size_t>(factor.dim());
        const auto n = static_cast<std::size_t>(samples);
        std::vector<double> latent(n * dim);
        for (std::size_t r = 0; r < n; ++r) draw_latent(factor, rng, std::span<double>(latent.data() + r * dim, dim));

        table.samples = samples;
        table.discount = cfg.gamma;
        table.continuation_samples.resize(table.entries.size());
        std::vector<double> thresholds(dim);
        for (std::size_t e = 0; e < table.entries.size(); ++e) {
            ActionValue& entry = table.entries[e];
            const MdpState post = post_investment(s, entry.action);
            for (std::size_t r = 0; r < dim; ++r) thresholds[r] = default_threshold(post.network.node(factor.index[r]).pd());
            std::unordered_map<std::uint64_t, double> cache;
            auto& values = table.continuation_samples[e];
            values.resize(n);
            double sum = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                const double* x = latent.data() + r * dim;
                std::uint64_t mask = 0;
                for (std::size_t c = 0; c < dim; ++c) {
                    if (x[c] < thresholds[c]) mask |= std::uint64_t{1} << factor.index[c];
                }
                auto it = cache.find(mask);
                if (it == cache.end()) {
                    const double v = approximate_value(successor(post, NodeSet(mask)), fit, cfg);
                    it = cache.emplace(mask, v).first;
                }
                values[r] = it->second;
                sum += it->second;
            }
            const double mean = sum / static_cast<double>(n);
            double var = 0.0;
            for (double v : values) var += (v - mean) * (v - mean);
            var /= static_cast<double>(n - 1);
            entry.continuation = mean;
            entry.q = entry.immediate + cfg.gamma * mean;
            entry.std_error = cfg.gamma * std::sqrt(var / static_cast<double>(n));
        }
    }
    std::vector<double> qs;
    for (const ActionValue& e : table.entries) qs.push_back(e.q);
    table.best = preferred_max(qs, totals);
    return table;
}

BellmanResult bellman_value(const MdpState& s, const PolicyFit& fit, const MdpConfig& cfg, const SolverConfig& solver,
                            RandomStream rng) {
    BellmanResult out;
    out.table = q_table(s, fit, cfg, solver.n_bellman, rng);
    out.action_index = out.table.best;
    out.value = out.table.entries[static_cast<std::size_t>(out.table.best)].q;
    return out;
}

QEstimate q_star(const MdpState& s, const InvestmentAction& a, const PolicyFit& fit, const MdpConfig& cfg,
                 const SolverConfig& solver, RandomStream rng) {
    const QTable table = q_table(s, fit, cfg, solver.evaluation_samples(), rng);
    const int idx = table.index_of(a.label);
    if (idx < 0) throw InvalidActionError("q_star: action " + a.label + " is not available in this state");
    const ActionValue& e = table.entries[static_cast<std::size_t>(idx)];
    return {e.q, e.std_error};
}

std::pair<InvestmentAction, QTable> optimal_action(const MdpState& s, const PolicyFit& fit, const MdpConfig& cfg,
                                                   const SolverConfig& solver, RandomStream rng) {
    QTable table = q_table(s, fit, cfg, solver.evaluation_samples(), rng);
    InvestmentAction best = table.entries[static_cast<std::size_t>(table.best)].action;
    return {std::move(best), std::move(table)};
}

ConvenienceEstimate convenience_from(const QTable& table) {
    ConvenienceEstimate out;
    const int none = table.index_of("0@0");
    if (none < 0 || table.entries.size() < 2) return out;
    std::vector<double> qs, totals;
    std::vector<int> ids;
    for (std::size_t i = 0; i < table.entries.size(); ++i) {
        if (static_cast<int>(i) == none) continue;
        qs.push_back(table.entries[i].q);
        totals.push_back(table.entries[i].action.total());
        ids.push_back(static_cast<int>(i));
    }
    const int best = ids[static_cast<std::size_t>(preferred_max(qs, totals))];
    out.value = table.entries[static_cast<std::size_t>(best)].q - table.entries[static_cast<std::size_t>(none)].q;
    out.std_error = table.difference_std_error(best, none);
    out.best_label = table.entries[static_cast<std::size_t>(best)].action.label;
    return out;
}

ConvenienceEstimate convenience(const MdpState& s, const PolicyFit& fit, const MdpConfig& cfg, const SolverConfig& solver,
                                RandomStream rng) {
    return convenience_from(q_table(s, fit, cfg, solver.evaluation_samples(), rng));
}

NodeSet sample_forced_set(NodeSet candidates, int max_size, RandomStream& rng, int min_size) {
    const auto ids = candidates.ids();
    const int n = static_cast<int>(ids.size());
    const int top = std::min(max_size, n);
    if (top < min_size) return {};
    // Every set of size k carries weight exp(-k); there are C(n, k) of them.
    std::vector<double> weights;
    double total = 0.0;
    for (int k = min_size; k <= top; ++k) {
        const double log_w = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - k;
        weights.push_back(std::exp(log_w));
        total += weights.back();
    }
    double u = rng.uniform() * total;
    int size = top;
    for (int k = min_size; k <= top; ++k) {
        u -= weights[static_cast<std::size_t>(k - min_size)];
        if (u < 0.0) {
            size = k;
            break;
        }
    }
    auto pool = ids;
    NodeSet out;
    for (int j = 0; j < size; ++j) {
        const auto pick = j + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n - j));
        std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(pick)]);
        out.insert(pool[static_cast<std::size_t>(j)]);
    }
    return out;
}

namespace {

std::vector<long long> state_key(const MdpState& s) {
    std::vector<long long> key{s.t, static_cast<long long>(s.defaulted.mask())};
    for (const BankNode& node : s.network.nodes()) {
        key.push_back(std::llround(node.total_asset * 1e9));
        key.push_back(std::llround(node.equity * 1e9));
        key.push_back(std::llround(node.gov_investment * 1e9));
        key.push_back(node.forced_default ? 1 : 0);
    }
    return key;
}

MdpState force_defaults(const MdpState& s, NodeSet forced) {
    MdpState out = s;
    if (forced.empty()) return out;
    out.network = apply_impacts(s.network, forced, s.defaulted);
    out.defaulted = s.defaulted | forced;
    return out;
}

}  // namespace

std::vector<MdpState> representative_portfolio(const MdpState& s0, int t, const MdpConfig& cfg, const SolverConfig& solver,
                                               RandomStream rng) {
    if (t < 0 || t >= s0.horizon) throw DomainError("representative_portfolio: t must lie in [0, M-1]");
    const int n = s0.network.size();
    const NodeSet active = s0.active();
    MdpState moved = s0;
    moved.t = t;

    std::vector<MdpState> out;
    std::set<std::vector<long long>> seen;
    auto emit = [&](MdpState s) {
        if (seen.insert(state_key(s)).second) out.push_back(std::move(s));
    };

    emit(moved);
    for (int i : active.ids()) emit(force_defaults(moved, NodeSet{i}));
    const int multi = solver.multi_default_states < 0 ? 2 * n : solver.multi_default_states;
    RandomStream multi_rng = rng.split(1);
    for (int j = 0; j < multi && active.size() >= 2; ++j) {
        emit(force_defaults(moved, sample_forced_set(active, solver.max_forced_defaults, multi_rng)));
    }

    auto actions = enumerate_actions(s0, cfg);
    actions.erase(actions.begin());  // the no-op is already covered
    const int cap = solver.action_variants < 0 ? n : solver.action_variants;
    RandomStream action_rng = rng.split(2);
    if (static_cast<int>(actions.size()) > cap) {
        for (int j = 0; j < cap; ++j) {
            const auto pick = j + static_cast<int>(action_rng.next_u64() % static_cast<std::uint64_t>(actions.size() - j));
            std::swap(actions[static_cast<std::size_t>(j)], actions[static_cast<std::size_t>(pick)]);
        }
        actions.resize(static_cast<std::size_t>(cap));
    }
    for (const InvestmentAction& a : actions) {
        MdpState invested = post_investment(s0, a);
        invested.t = t;
        emit(invested);
        emit(force_defaults(invested, sample_forced_set(active, solver.max_forced_defaults, action_rng, 1)));
    }
    return out;
}

PolicyFit fit_policy(const MdpState& s0, const MdpConfig& cfg, const SolverConfig& solver) {
    cfg.validate();
    solver.validate();
    const int horizon = s0.horizon;
    if (horizon < 2) throw ConfigError("fit_policy: horizon must be at least 2");
    const int n = s0.network.size();
    PolicyFit fit = PolicyFit::initial(n, horizon);
    fit.seed = solver.seed;
    const RandomStream root(solver.seed);

    for (int t = horizon - 2; t >= 0; --t) {
        const std::vector<MdpState> portfolio = representative_portfolio(s0, t, cfg, solver, root.split(0x1000 + static_cast<std::uint64_t>(t)));
        const int m = horizon - t;
        const auto rows = static_cast<Eigen::Index>(portfolio.size());
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(n) * m);
        Eigen::VectorXd y(rows);
        const RandomStream step_rng = root.split(static_cast<std::uint64_t>(t));
        for (Eigen::Index r = 0; r < rows; ++r) {
            const MdpState& s = portfolio[static_cast<std::size_t>(r)];
            y(r) = bellman_value(s, fit, cfg, solver, step_rng.split(static_cast<std::uint64_t>(r))).value;
            const ZMatrix z = greedy_action_sequence(s, cfg);
            for (int i = 0; i < n; ++i) {
                for (int k = 0; k < m; ++k) x(r, static_cast<Eigen::Index>(i) * m + k) = -z.values(i, k);
            }
        }
        // With the ones prior the regression fits the correction to beta = 1
        // (which is exactly -TL), so shrinkage pulls toward the start point.
        const double prior = solver.shrink_to_ones ? 1.0 : 0.0;
        const Eigen::VectorXd target = y - prior * x.rowwise().sum();
        const RidgeFit rf = ridge_cv(x, target, solver.lambda_grid, solver.folds, solver.seed + static_cast<std::uint64_t>(t),
                                     solver.feature_scaling);
        Eigen::MatrixXd beta(n, m);
        int negative = 0;
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < m; ++k) {
                const Eigen::Index c = static_cast<Eigen::Index>(i) * m + k;
                // A feature that is zero on every portfolio state carries no information.
                beta(i, k) = x.col(c).isZero(0.0) ? 0.0 : prior + rf.coef(c);
                if (beta(i, k) < 0.0) ++negative;
            }
        }
        const auto ti = static_cast<std::size_t>(t);
        fit.beta[ti] = std::move(beta);
        fit.fitted[ti] = true;
        fit.lambda[ti] = rf.lambda;
        // Score against the Bellman targets themselves, not the shifted target.
        const double sst = (y.array() - y.mean()).square().sum();
        const double cv_sse = rf.cv_mse.empty() ? 0.0 : *std::min_element(rf.cv_mse.begin(), rf.cv_mse.end()) * static_cast<double>(rows);
        fit.cv_r2[ti] = rf.cv_mse.empty() ? rf.cv_r2 : (sst > 0.0 ? 1.0 - cv_sse / sst : (cv_sse == 0.0 ? 1.0 : 0.0));
        fit.portfolio_size[ti] = static_cast<int>(rows);
        fit.negative_coefficients[ti] = negative;
        fit.underdetermined[ti] = rf.underdetermined;
    }
    return fit;
}

}  // namespace bailout
