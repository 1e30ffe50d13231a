#include "bailout/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "bailout/errors.hpp"

namespace bailout {

void MdpConfig::validate() const {
    if (horizon < 0) throw ConfigError("horizon must be non-negative");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("discount factor must lie in [0, 1)");
    if (std::find(levels_bp.begin(), levels_bp.end(), 0) == levels_bp.end()) {
        throw ConfigError("investment levels must include 0");
    }
    for (int level : levels_bp) {
        if (level < 0) throw ConfigError("investment levels must be non-negative");
    }
    if (!(risky_threshold >= 0.0 && risky_threshold < 1.0)) throw ConfigError("risky threshold must lie in [0, 1)");
}

std::string ActionSpec::label() const {
    if (scope == ActionScope::kNone || level_bp == 0) return "0@0";
    char level[32];
    if (level_bp % 10 == 0) {
        std::snprintf(level, sizeof level, "%02d", level_bp / 10);
    } else {
        std::snprintf(level, sizeof level, "%04.1f", level_bp / 10.0);
    }
    const int target = scope == ActionScope::kSingle ? node + 1 : 0;
    return std::to_string(target) + "@" + level;
}

double InvestmentAction::total() const {
    double sum = 0.0;
    for (double d : delta_j) sum += d;
    return sum;
}

MdpState initial_state(FinancialNetwork network, int horizon) {
    MdpState s;
    s.network = std::move(network);
    s.horizon = horizon;
    return s;
}

NodeSet risky_nodes(const FinancialNetwork& net, NodeSet active, double threshold) {
    NodeSet risky;
    for (int i : active.ids()) {
        const BankNode& node = net.node(i);
        if (node.forced_default || node.equity <= 0.0) continue;
        if (node.pd() > threshold) risky.insert(i);
    }
    return risky;
}

std::vector<ActionSpec> enumerate_action_specs(NodeSet risky, const MdpConfig& cfg) {
    std::vector<ActionSpec> specs{ActionSpec::none()};
    if (risky.empty()) return specs;
    const std::set<int> levels(cfg.levels_bp.begin(), cfg.levels_bp.end());
    if (cfg.targeting == TargetingMode::kSingleOrAll) {
        for (int node : risky.ids()) {
            for (int level : levels) {
                if (level > 0) specs.push_back({ActionScope::kSingle, node, level});
            }
        }
        if (risky.size() == 1) return specs;
    }
    for (int level : levels) {
        if (level > 0) specs.push_back({ActionScope::kAllRisky, -1, level});
    }
    return specs;
}

std::vector<double> resolve_amounts(const ActionSpec& spec, std::span<const double> total_assets, NodeSet risky) {
    std::vector<double> amounts(total_assets.size(), 0.0);
    const double fraction = spec.level_bp * 1e-4;
    switch (spec.scope) {
        case ActionScope::kNone:
            break;
        case ActionScope::kSingle:
            if (spec.node < 0 || spec.node >= static_cast<int>(total_assets.size())) {
                throw InvalidActionError("action targets an unknown node");
            }
            amounts[static_cast<std::size_t>(spec.node)] = fraction * total_assets[static_cast<std::size_t>(spec.node)];
            break;
        case ActionScope::kAllRisky:
            for (int i : risky.ids()) amounts[static_cast<std::size_t>(i)] = fraction * total_assets[static_cast<std::size_t>(i)];
            break;
    }
    return amounts;
}

InvestmentAction make_action(const MdpState& s, const ActionSpec& spec, const MdpConfig& cfg) {
    const NodeSet risky = risky_nodes(s.network, s.active(), cfg.risky_threshold);
    if (spec.scope == ActionScope::kSingle && !risky.contains(spec.node)) {
        throw InvalidActionError("action " + spec.label() + " targets a node that is not risky");
    }
    std::vector<double> assets(static_cast<std::size_t>(s.network.size()));
    for (int i = 0; i < s.network.size(); ++i) assets[static_cast<std::size_t>(i)] = s.network.node(i).total_asset;
    return InvestmentAction{spec, resolve_amounts(spec, assets, risky), spec.label()};
}

std::vector<InvestmentAction> enumerate_actions(const MdpState& s, const MdpConfig& cfg) {
    const NodeSet risky = risky_nodes(s.network, s.active(), cfg.risky_threshold);
    std::vector<double> assets(static_cast<std::size_t>(s.network.size()));
    for (int i = 0; i < s.network.size(); ++i) assets[static_cast<std::size_t>(i)] = s.network.node(i).total_asset;
    std::vector<InvestmentAction> actions;
    for (const ActionSpec& spec : enumerate_action_specs(risky, cfg)) {
        actions.push_back(InvestmentAction{spec, resolve_amounts(spec, assets, risky), spec.label()});
    }
    return actions;
}

namespace {

bool nearly_equal(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

int preferred(std::span<const double> values, std::span<const double> totals, bool maximise) {
    if (values.empty()) return -1;
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i) {
        const double v = values[static_cast<std::size_t>(i)];
        const double b = values[static_cast<std::size_t>(best)];
        if (nearly_equal(v, b)) {
            if (totals[static_cast<std::size_t>(i)] < totals[static_cast<std::size_t>(best)] - 1e-12) best = i;
        } else if (maximise ? v > b : v < b) {
            best = i;
        }
    }
    return best;
}

}  // namespace

int preferred_max(std::span<const double> values, std::span<const double> totals) { return preferred(values, totals, true); }
int preferred_min(std::span<const double> values, std::span<const double> totals) { return preferred(values, totals, false); }

MdpState post_investment(const MdpState& s, const InvestmentAction& a) {
    MdpState out = s;
    out.network = apply_investment(s.network, a.delta_j, s.defaulted);
    return out;
}

double step_reward(const MdpState& post, NodeSet defaults_now) {
    double loss = 0.0;
    for (int i : defaults_now.ids()) loss += taxpayer_loss(post.network.node(i));
    return -loss;
}

MdpState successor(const MdpState& post, NodeSet defaults_now) {
    MdpState next;
    next.network = apply_impacts(post.network, defaults_now, post.defaulted);
    next.defaulted = post.defaulted | defaults_now;
    next.t = post.t + 1;
    next.horizon = post.horizon;
    return next;
}

StepOutcome step(const MdpState& s, const InvestmentAction& a, RandomStream& rng) {
    if (s.t >= s.horizon) throw EpisodeOverError("step: episode is over (t = " + std::to_string(s.t) + ")");
    const MdpState post = post_investment(s, a);
    const NodeSet active = s.active();
    StepOutcome out;
    if (!active.empty()) {
        const CorrelationFactor factor = factor_for(post.network.correlation(), active);
        std::vector<double> pds;
        pds.reserve(factor.index.size());
        for (int i : factor.index) pds.push_back(post.network.node(i).pd());
        out.latent_draw = sample_defaults(pds, factor, rng);
        out.defaults_this_step = out.latent_draw.default_set;
    }
    out.reward = step_reward(post, out.defaults_this_step);
    out.next_state = successor(post, out.defaults_this_step);
    return out;
}

double transition_prob(const MdpState& s, const InvestmentAction& a, const MdpState& s_next) {
    const NodeSet active = s.active();
    if (active.size() > 3) throw DimensionError("transition_prob: exact probabilities need at most 3 active nodes");
    if (s_next.t != s.t + 1 || s_next.horizon != s.horizon) return 0.0;
    if (!s.defaulted.is_subset_of(s_next.defaulted)) return 0.0;
    const NodeSet defaults_now = s_next.defaulted.minus(s.defaulted);
    const MdpState post = post_investment(s, a);

    // s_next must carry exactly the balance sheets implied by these defaults.
    const MdpState expected = successor(post, defaults_now);
    if (expected.network.size() != s_next.network.size()) return 0.0;
    for (int i = 0; i < expected.network.size(); ++i) {
        const BankNode& x = expected.network.node(i);
        const BankNode& y = s_next.network.node(i);
        if (std::abs(x.total_asset - y.total_asset) > 1e-9 || std::abs(x.equity - y.equity) > 1e-9 ||
            std::abs(x.gov_investment - y.gov_investment) > 1e-9 || x.forced_default != y.forced_default) {
            return 0.0;
        }
    }

    std::vector<double> pds(static_cast<std::size_t>(s.network.size()), 0.5);
    for (int i : active.ids()) pds[static_cast<std::size_t>(i)] = post.network.node(i).pd();
    return joint_default_prob(pds, defaults_now, active.minus(defaults_now), post.network.correlation()).probability;
}

double expected_one_step_reward(const MdpState& s, const InvestmentAction& a) {
    const MdpState post = post_investment(s, a);
    double loss = 0.0;
    for (int i : s.active().ids()) {
        const BankNode& node = post.network.node(i);
        loss += node.pd() * taxpayer_loss(node);
    }
    return -loss;
}

double cumulative_reward(std::span<const double> rewards, double gamma) {
    double total = 0.0;
    double discount = 1.0;
    for (double r : rewards) {
        total += discount * r;
        discount *= gamma;
    }
    return total;
}

std::string Episode::to_json_lines() const {
    std::string out;
    for (const TrajectoryRecord& rec : trajectory) {
        nlohmann::json line;
        line["step"] = rec.t;
        line["action"] = rec.action;
        std::vector<int> defaults;
        for (int id : rec.defaults.ids()) defaults.push_back(id + 1);
        line["defaults"] = defaults;
        line["reward"] = rec.reward;
        out += line.dump() + "\n";
    }
    return out;
}

Episode simulate_episode(const MdpState& s0, const Policy& policy, double gamma, RandomStream& rng) {
    Episode episode;
    std::vector<double> rewards;
    MdpState s = s0;
    while (s.t < s.horizon) {
        const InvestmentAction a = policy(s);
        StepOutcome outcome = step(s, a, rng);
        episode.trajectory.push_back({s.t, a.label, outcome.defaults_this_step, outcome.reward});
        rewards.push_back(outcome.reward);
        s = std::move(outcome.next_state);
    }
    episode.cumulative_reward = cumulative_reward(rewards, gamma);
    return episode;
}

}  // namespace bailout
