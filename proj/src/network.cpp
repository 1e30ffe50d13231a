#include "bailout/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bailout/copula.hpp"
#include "bailout/errors.hpp"
#include "bailout/normal.hpp"

namespace bailout {

double BankNode::pd() const {
    if (forced_default) return 1.0;
    return merton_pd(total_asset, equity, mu, sigma, pd_floor);
}

FinancialNetwork::FinancialNetwork(std::vector<BankNode> nodes, Eigen::MatrixXd exposure, Eigen::MatrixXd correlation)
    : nodes_(std::move(nodes)) {
    const auto n = static_cast<Eigen::Index>(nodes_.size());
    if (n > NodeSet::kCapacity) throw DimensionError("networks are limited to 64 nodes");
    if (exposure.rows() != n || exposure.cols() != n) throw DimensionError("exposure matrix must be N x N");
    if (correlation.rows() != n || correlation.cols() != n) throw DimensionError("correlation matrix must be N x N");
    for (Eigen::Index i = 0; i < n; ++i) {
        nodes_[static_cast<std::size_t>(i)].id = static_cast<int>(i);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j && exposure(i, j) != 0.0) throw DomainError("self exposure w_ii must be 0");
            if (exposure(i, j) < 0.0 || !std::isfinite(exposure(i, j))) throw DomainError("exposures must be finite and non-negative");
        }
    }
    // Throws on asymmetry, bad diagonal or loss of PSD-ness.
    (void)cholesky_factor(correlation);
    exposure_ = std::make_shared<const Eigen::MatrixXd>(std::move(exposure));
    correlation_ = std::make_shared<const Eigen::MatrixXd>(std::move(correlation));
}

FinancialNetwork FinancialNetwork::with_exposure(Eigen::MatrixXd exposure) const {
    return FinancialNetwork(nodes_, std::move(exposure), *correlation_);
}

FinancialNetwork FinancialNetwork::with_correlation(Eigen::MatrixXd correlation) const {
    return FinancialNetwork(nodes_, *exposure_, std::move(correlation));
}

double merton_pd(double total_asset, double equity, double mu, double sigma, double pd_floor) {
    if (!(sigma > 0.0)) throw DomainError("merton_pd: sigma must be positive");
    if (!(pd_floor > 0.0 && pd_floor < 1.0)) throw DomainError("merton_pd: pd_floor must lie in (0, 1)");
    if (equity <= 0.0) return 1.0;
    if (!(total_asset > 0.0)) throw DomainError("merton_pd: total asset must be positive");
    const double liability = total_asset - equity;
    if (liability < 0.0) throw DomainError("merton_pd: equity exceeds total asset");
    if (liability == 0.0) return pd_floor;
    const double distance = (std::log(total_asset / liability) + mu - 0.5 * sigma * sigma) / sigma;
    const double pd = normal_sf(distance);
    return std::clamp(std::max(pd, pd_floor), pd_floor, 1.0);
}

double calibrate_sigma(double total_asset, double equity, double mu, double pd0) {
    if (!(equity > 0.0 && equity < total_asset)) throw DomainError("calibrate_sigma: requires 0 < E < W");
    if (!(pd0 > 0.0 && pd0 < 1.0)) throw DomainError("calibrate_sigma: pd0 must lie in (0, 1)");
    const double c = std::log(total_asset / (total_asset - equity)) + mu;
    if (!(c > 0.0)) {
        throw NoSolutionError("calibrate_sigma: no positive volatility reaches pd0 (log(W/B) + mu = " + std::to_string(c) + ")");
    }
    const double q = -normal_quantile(pd0);  // Phi^{-1}(1 - pd0) without cancellation
    const double root = std::sqrt(q * q + 2.0 * c);
    // For q > 0 the textbook form -q + root cancels; use the conjugate.
    return q > 0.0 ? 2.0 * c / (q + root) : root - q;
}

FinancialNetwork apply_impacts(const FinancialNetwork& net, NodeSet defaults_now, NodeSet frozen) {
    FinancialNetwork out = net;
    if (defaults_now.empty()) return out;
    const auto sources = defaults_now.ids();
    const NodeSet untouched = defaults_now | frozen;
    for (int i = 0; i < net.size(); ++i) {
        if (untouched.contains(i)) continue;
        double impact = 0.0;
        for (int j : sources) impact += net.exposure(i, j);
        if (impact == 0.0) continue;
        BankNode& node = out.node(i);
        node.total_asset -= impact;
        node.equity -= impact;
        if (node.equity <= 0.0) node.forced_default = true;
    }
    return out;
}

double taxpayer_loss(const BankNode& node) {
    return node.alpha * std::max(node.total_asset, 0.0) + node.gov_investment * node.lgd;
}

FinancialNetwork apply_investment(const FinancialNetwork& net, std::span<const double> delta_j, NodeSet defaulted) {
    if (static_cast<int>(delta_j.size()) != net.size()) throw DimensionError("apply_investment: one amount per node required");
    FinancialNetwork out = net;
    for (int i = 0; i < net.size(); ++i) {
        const double d = delta_j[static_cast<std::size_t>(i)];
        if (d < 0.0 || !std::isfinite(d)) throw InvalidActionError("apply_investment: amounts must be finite and non-negative");
        if (d == 0.0) continue;
        if (defaulted.contains(i)) {
            throw InvalidActionError("apply_investment: node " + std::to_string(i + 1) + " has defaulted");
        }
        BankNode& node = out.node(i);
        node.total_asset += d;
        node.equity += d;
        node.gov_investment += d;
    }
    return out;
}

void calibrate_network(FinancialNetwork& net, std::span<const double> pd0) {
    if (static_cast<int>(pd0.size()) != net.size()) throw DimensionError("calibrate_network: one PD per node required");
    for (int i = 0; i < net.size(); ++i) {
        BankNode& node = net.node(i);
        node.sigma = calibrate_sigma(node.total_asset, node.equity, node.mu, pd0[static_cast<std::size_t>(i)]);
    }
}

}  // namespace bailout
