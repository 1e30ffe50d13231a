#include "bailout/z_features.hpp"

#include <algorithm>
#include <cmath>

#include "bailout/errors.hpp"

namespace bailout {

namespace {

// Path of expected impacts and cumulative investments. Offsets are 0-based
// here (offset k in the formulas is index k - 1).
class ZPath {
public:
    ZPath(const MdpState& s, const MdpConfig& cfg)
        : cfg_(cfg), net_(s.network), active_(s.active().ids()), n_(static_cast<int>(active_.size())), m_(std::max(0, s.time_to_maturity())) {
        const auto size = static_cast<std::size_t>(n_) * static_cast<std::size_t>(m_);
        invest_.assign(size, 0.0);
        impact_.assign(size, 0.0);
        pd_.assign(size, 0.0);
        base_pd_.assign(size, 0.0);
        loss_.assign(size, 0.0);
        survival_.assign(size, 1.0);
        z_.assign(size, 0.0);
        row_total_.assign(static_cast<std::size_t>(m_), 0.0);
        amount_total_.assign(static_cast<std::size_t>(m_), 0.0);
        actions_.assign(static_cast<std::size_t>(m_), ActionSpec::none());
        exposure_.resize(n_, n_);
        for (int a = 0; a < n_; ++a) {
            for (int b = 0; b < n_; ++b) exposure_(a, b) = a == b ? 0.0 : net_.exposure(active_[static_cast<std::size_t>(a)], active_[static_cast<std::size_t>(b)]);
        }
        weighted_.resize(n_);
        added_.resize(n_);
        discount_.resize(static_cast<std::size_t>(m_));
        double d = 1.0;
        for (int k = 0; k < m_; ++k) {
            discount_[static_cast<std::size_t>(k)] = d;
            d *= cfg.gamma;
        }
    }

    int horizon() const { return m_; }

    // Risky set at offset k given everything before k (impacts at k depend
    // only on earlier offsets).
    NodeSet risky_at(int k) {
        prepare_offset(k);
        return risky_prepared(k);
    }

    // Sets the action at offset k (and resets later offsets to the no-op),
    // then recomputes offsets k..m-1. Returns the total expected loss.
    double evaluate_from(int k, const ActionSpec& action) {
        actions_[static_cast<std::size_t>(k)] = action;
        for (int r = k + 1; r < m_; ++r) actions_[static_cast<std::size_t>(r)] = ActionSpec::none();
        for (int r = k; r < m_; ++r) compute_offset(r);
        double total = 0.0;
        for (double v : row_total_) total += v;
        return total;
    }

    void evaluate_all(std::span<const ActionSpec> actions) {
        for (int r = 0; r < m_; ++r) {
            actions_[static_cast<std::size_t>(r)] = r < static_cast<int>(actions.size()) ? actions[static_cast<std::size_t>(r)] : ActionSpec::none();
        }
        for (int r = 0; r < m_; ++r) compute_offset(r);
    }

    double amount_total(int k) const { return amount_total_[static_cast<std::size_t>(k)]; }

    ZMatrix to_matrix() const {
        ZMatrix out;
        out.values = Eigen::MatrixXd::Zero(net_.size(), m_);
        for (int a = 0; a < n_; ++a) {
            for (int k = 0; k < m_; ++k) out.values(active_[static_cast<std::size_t>(a)], k) = z_[idx(a, k)];
        }
        out.actions = actions_;
        return out;
    }

    const std::vector<ActionSpec>& actions() const { return actions_; }

private:
    std::size_t idx(int a, int k) const { return static_cast<std::size_t>(k) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(a); }

    double prior_invest(int a, int k) const { return k == 0 ? 0.0 : invest_[idx(a, k - 1)]; }

    // Impacts and survival products entering offset k.
    void prepare_offset(int k) {
        if (k == 0) {
            for (int a = 0; a < n_; ++a) {
                impact_[idx(a, 0)] = 0.0;
                survival_[idx(a, 0)] = 1.0;
            }
            base_pds(0);
            return;
        }
        for (int b = 0; b < n_; ++b) weighted_(b) = pd_[idx(b, k - 1)] * survival_[idx(b, k - 1)];
        added_.noalias() = exposure_ * weighted_;
        for (int a = 0; a < n_; ++a) {
            impact_[idx(a, k)] = impact_[idx(a, k - 1)] + added_(a);
            survival_[idx(a, k)] = survival_[idx(a, k - 1)] * (1.0 - pd_[idx(a, k - 1)]);
        }
        base_pds(k);
    }

    // PD at offset k before that offset's injection.
    void base_pds(int k) {
        for (int a = 0; a < n_; ++a) {
            const BankNode& node = net_.node(active_[static_cast<std::size_t>(a)]);
            const double shift = prior_invest(a, k) - impact_[idx(a, k)];
            base_pd_[idx(a, k)] = node.forced_default ? 1.0
                                                      : merton_pd(node.total_asset + shift, node.equity + shift, node.mu, node.sigma, node.pd_floor);
        }
    }

    NodeSet risky_prepared(int k) const {
        NodeSet risky;
        for (int a = 0; a < n_; ++a) {
            const int i = active_[static_cast<std::size_t>(a)];
            const BankNode& node = net_.node(i);
            if (node.forced_default || node.equity + prior_invest(a, k) - impact_[idx(a, k)] <= 0.0) continue;
            if (base_pd_[idx(a, k)] > cfg_.risky_threshold) risky.insert(i);
        }
        return risky;
    }

    void compute_offset(int k) {
        prepare_offset(k);
        const ActionSpec& action = actions_[static_cast<std::size_t>(k)];
        NodeSet risky;
        if (action.scope == ActionScope::kAllRisky) risky = risky_prepared(k);
        const double fraction = action.level_bp * 1e-4;
        double row = 0.0;
        double spent = 0.0;
        for (int a = 0; a < n_; ++a) {
            const int i = active_[static_cast<std::size_t>(a)];
            const BankNode& node = net_.node(i);
            const double before = prior_invest(a, k);
            const double impact = impact_[idx(a, k)];
            double amount = 0.0;
            const bool targeted = (action.scope == ActionScope::kSingle && action.node == i) ||
                                  (action.scope == ActionScope::kAllRisky && risky.contains(i));
            if (targeted) amount = fraction * (node.total_asset + before - impact);
            amount = std::max(amount, 0.0);
            spent += amount;
            const double cumulative = before + amount;
            invest_[idx(a, k)] = cumulative;
            const double assets = node.total_asset + cumulative - impact;
            const double equity = node.equity + cumulative - impact;
            const double pd = node.forced_default ? 1.0
                              : amount == 0.0    ? base_pd_[idx(a, k)]
                                                 : merton_pd(assets, equity, node.mu, node.sigma, node.pd_floor);
            const double loss = node.alpha * std::max(assets, 0.0) + (node.gov_investment + cumulative) * node.lgd;
            pd_[idx(a, k)] = pd;
            loss_[idx(a, k)] = loss;
            const double z = pd * loss * discount_[static_cast<std::size_t>(k)] * survival_[idx(a, k)];
            z_[idx(a, k)] = z;
            row += z;
        }
        row_total_[static_cast<std::size_t>(k)] = row;
        amount_total_[static_cast<std::size_t>(k)] = spent;
    }

    const MdpConfig& cfg_;
    const FinancialNetwork& net_;
    std::vector<int> active_;
    int n_;
    int m_;
    Eigen::MatrixXd exposure_;  // active x active, zero diagonal
    Eigen::VectorXd weighted_, added_;
    std::vector<double> discount_;
    std::vector<double> invest_, impact_, pd_, base_pd_, loss_, survival_, z_;
    std::vector<double> row_total_;
    std::vector<double> amount_total_;
    std::vector<ActionSpec> actions_;
};

}  // namespace

ZMatrix z_matrix(const MdpState& s, std::span<const ActionSpec> actions, const MdpConfig& cfg) {
    ZPath path(s, cfg);
    path.evaluate_all(actions);
    return path.to_matrix();
}

ZMatrix greedy_action_sequence(const MdpState& s, const MdpConfig& cfg) {
    ZPath path(s, cfg);
    const int m = path.horizon();
    if (m == 0) return path.to_matrix();
    path.evaluate_from(0, ActionSpec::none());
    std::vector<double> totals;
    std::vector<double> amounts;
    for (int k = 0; k < m; ++k) {
        const std::vector<ActionSpec> candidates = enumerate_action_specs(path.risky_at(k), cfg);
        if (candidates.size() == 1) {
            path.evaluate_from(k, candidates.front());
            continue;
        }
        totals.clear();
        amounts.clear();
        for (const ActionSpec& c : candidates) {
            totals.push_back(path.evaluate_from(k, c));
            amounts.push_back(path.amount_total(k));
        }
        const int best = preferred_min(totals, amounts);
        path.evaluate_from(k, candidates[static_cast<std::size_t>(best)]);
    }
    return path.to_matrix();
}

double value_approx(const ZMatrix& zbar, const Eigen::MatrixXd& beta) {
    if (beta.rows() != zbar.values.rows() || beta.cols() != zbar.values.cols()) {
        throw DimensionError("value_approx: coefficient matrix is " + std::to_string(beta.rows()) + "x" + std::to_string(beta.cols()) +
                             ", features are " + std::to_string(zbar.values.rows()) + "x" + std::to_string(zbar.values.cols()));
    }
    return -(beta.array() * zbar.values.array()).sum();
}

double value_approx(const MdpState& s, const Eigen::MatrixXd& beta, const MdpConfig& cfg) {
    return value_approx(greedy_action_sequence(s, cfg), beta);
}

}  // namespace bailout
