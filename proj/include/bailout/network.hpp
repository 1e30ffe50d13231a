#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bailout/node_set.hpp"

namespace bailout {

// One institution. PD is never stored: it is evaluated on demand from the
// balance sheet (see merton_pd / BankNode::pd).
struct BankNode {
    int id = 0;  // 0-based index into the network
    std::string label;
    double total_asset = 0.0;  // W
    double equity = 0.0;       // E
    double mu = 0.0;
    double sigma = 0.0;
    double lgd = 1.0;
    double alpha = 0.0;
    double gov_investment = 0.0;  // J
    double pd_floor = 0.00021;
    bool forced_default = false;

    double liability() const { return total_asset - equity; }
    double pd() const;
};

// Nodes plus the immutable exposure and correlation matrices. Copies share
// the matrices, so snapshots of balance sheets are cheap.
class FinancialNetwork {
public:
    FinancialNetwork() = default;
    // Validates w_ii = 0, w_ij >= 0 and that the correlation matrix is a
    // symmetric unit-diagonal PSD matrix.
    FinancialNetwork(std::vector<BankNode> nodes, Eigen::MatrixXd exposure, Eigen::MatrixXd correlation);

    int size() const { return static_cast<int>(nodes_.size()); }
    const std::vector<BankNode>& nodes() const { return nodes_; }
    std::vector<BankNode>& mutable_nodes() { return nodes_; }
    const BankNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
    BankNode& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }

    const Eigen::MatrixXd& exposure() const { return *exposure_; }
    const Eigen::MatrixXd& correlation() const { return *correlation_; }
    double exposure(int i, int j) const { return (*exposure_)(i, j); }

    // Same balance sheets, different matrices (used by scenario transforms).
    FinancialNetwork with_exposure(Eigen::MatrixXd exposure) const;
    FinancialNetwork with_correlation(Eigen::MatrixXd correlation) const;

private:
    std::vector<BankNode> nodes_;
    std::shared_ptr<const Eigen::MatrixXd> exposure_ = std::make_shared<const Eigen::MatrixXd>();
    std::shared_ptr<const Eigen::MatrixXd> correlation_ = std::make_shared<const Eigen::MatrixXd>();
};

// Merton implied default probability, floored. Returns exactly 1 when
// equity <= 0 and the floor when equity == total_asset.
double merton_pd(double total_asset, double equity, double mu, double sigma, double pd_floor);

// Asset volatility that reproduces pd0 through merton_pd (positive root of
// sigma^2/2 + q sigma - c = 0 with q = Phi^{-1}(1 - pd0), c = log(W/B) + mu).
double calibrate_sigma(double total_asset, double equity, double mu, double pd0);

// Propagates the impacts of the nodes in `defaults_now` to every node that
// is neither defaulting now nor in `frozen` (already defaulted). Nodes whose
// equity is wiped out are flagged forced_default.
FinancialNetwork apply_impacts(const FinancialNetwork& net, NodeSet defaults_now, NodeSet frozen = {});

// Taxpayer loss on default: alpha W + J LGD. Negative total asset (possible
// only after an impact larger than the whole balance sheet) counts as zero.
double taxpayer_loss(const BankNode& node);

// Capital injection: W, E and J each grow by delta_j[i]. Throws
// InvalidActionError for negative amounts or injections into `defaulted`.
FinancialNetwork apply_investment(const FinancialNetwork& net, std::span<const double> delta_j, NodeSet defaulted = {});

// Sets sigma of every node so that its PD equals pd0[i].
void calibrate_network(FinancialNetwork& net, std::span<const double> pd0);

}  // namespace bailout
