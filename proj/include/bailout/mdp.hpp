#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bailout/copula.hpp"
#include "bailout/network.hpp"
#include "bailout/node_set.hpp"
#include "bailout/random.hpp"

namespace bailout {

enum class TargetingMode {
    kSingleOrAll,      // one risky node at a time, or every risky node at one level
    kAllRiskyUniform,  // every risky node at one level
};

struct MdpConfig {
    int horizon = 7;
    double gamma = 0.98;
    // Investment sizes in basis points of the target's current total asset.
    std::vector<int> levels_bp = {0, 50, 100, 150, 200};
    TargetingMode targeting = TargetingMode::kSingleOrAll;
    double risky_threshold = 0.009;

    void validate() const;  // throws ConfigError
};

enum class ActionScope { kNone, kSingle, kAllRisky };

// What an action means, independent of the balance sheet it is applied to.
// Labels follow the "<node>@<tenths of a percent>" notation: "0@0" is no
// investment, "4@15" puts 1.5% of W_4 into node 4 and "0@05" puts 0.5% of
// W_i into every risky node i. Node numbers are 1-based.
struct ActionSpec {
    ActionScope scope = ActionScope::kNone;
    int node = -1;  // 0-based, only for kSingle
    int level_bp = 0;

    static ActionSpec none() { return {}; }
    std::string label() const;
    bool operator==(const ActionSpec&) const = default;
};

struct InvestmentAction {
    ActionSpec spec;
    std::vector<double> delta_j;  // one amount per node
    std::string label;

    double total() const;
};

struct MdpState {
    FinancialNetwork network;
    NodeSet defaulted;
    int t = 0;
    int horizon = 0;

    int time_to_maturity() const { return horizon - t; }
    NodeSet active() const { return NodeSet::all(network.size()).minus(defaulted); }
};

MdpState initial_state(FinancialNetwork network, int horizon);

// Active nodes that may receive capital: PD above the threshold and not
// already certain to default.
NodeSet risky_nodes(const FinancialNetwork& net, NodeSet active, double threshold);

// Specs in canonical order: no-op first, then single-node actions by (node,
// level), then uniform all-risky actions by level. When exactly one node is
// risky the all-risky actions coincide with single-node ones and are dropped.
std::vector<ActionSpec> enumerate_action_specs(NodeSet risky, const MdpConfig& cfg);

// Amounts for `spec` given the current total assets and the risky set.
std::vector<double> resolve_amounts(const ActionSpec& spec, std::span<const double> total_assets, NodeSet risky);

std::vector<InvestmentAction> enumerate_actions(const MdpState& s, const MdpConfig& cfg);
InvestmentAction make_action(const MdpState& s, const ActionSpec& spec, const MdpConfig& cfg);

// Index of the preferred entry for maximisation: highest value, then smaller
// total investment, then earliest position.
int preferred_max(std::span<const double> values, std::span<const double> totals);
int preferred_min(std::span<const double> values, std::span<const double> totals);

struct StepOutcome {
    MdpState next_state;
    double reward = 0.0;
    NodeSet defaults_this_step;
    LatentDraw latent_draw;
};

// Intermediate state after the injection, before the default draw.
MdpState post_investment(const MdpState& s, const InvestmentAction& a);

StepOutcome step(const MdpState& s, const InvestmentAction& a, RandomStream& rng);

// Same as step() with the default pattern supplied instead of sampled.
MdpState successor(const MdpState& post, NodeSet defaults_now);
double step_reward(const MdpState& post, NodeSet defaults_now);

// Exact P_a(s, s'); at most three active nodes.
double transition_prob(const MdpState& s, const InvestmentAction& a, const MdpState& s_next);

// -sum_i PD_i^a L_i^a over active nodes, in closed form.
double expected_one_step_reward(const MdpState& s, const InvestmentAction& a);

double cumulative_reward(std::span<const double> rewards, double gamma);

struct TrajectoryRecord {
    int t = 0;
    std::string action;
    NodeSet defaults;
    double reward = 0.0;
};

struct Episode {
    std::vector<TrajectoryRecord> trajectory;
    double cumulative_reward = 0.0;

    // One JSON object per line: {"step":..,"action":..,"defaults":[..],"reward":..}
    std::string to_json_lines() const;
};

using Policy = std::function<InvestmentAction(const MdpState&)>;

Episode simulate_episode(const MdpState& s0, const Policy& policy, double gamma, RandomStream& rng);

}  // namespace bailout
