#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bailout/mdp.hpp"

namespace bailout {

// Deterministic expected-direct-loss features of a state. values(i, k-1) is
// the discounted, survival-weighted expected loss of node i at offset k
// (time t + k - 1) along the path of expected impacts; rows of defaulted
// nodes are zero so the layout is always N x m.
struct ZMatrix {
    Eigen::MatrixXd values;
    std::vector<ActionSpec> actions;  // a_1..a_m used on the path

    double total() const { return values.sum(); }
};

// Features under an explicit action sequence (one spec per offset; shorter
// sequences are padded with the no-op). Action amounts are resolved on the
// deterministic path, using the risky set at each offset.
ZMatrix z_matrix(const MdpState& s, std::span<const ActionSpec> actions, const MdpConfig& cfg);

// Sequential argmin of the total expected direct loss, one offset at a time
// with the no-op assumed for the remaining offsets.
ZMatrix greedy_action_sequence(const MdpState& s, const MdpConfig& cfg);

// -sum_ik beta_ik Zbar_ik. `beta` must be N x m for the state's m.
double value_approx(const ZMatrix& zbar, const Eigen::MatrixXd& beta);
double value_approx(const MdpState& s, const Eigen::MatrixXd& beta, const MdpConfig& cfg);

}  // namespace bailout
