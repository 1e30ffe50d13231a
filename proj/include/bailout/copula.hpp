#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bailout/node_set.hpp"
#include "bailout/random.hpp"

namespace bailout {

// Lower-triangular factor L with L L^T = Sigma_sub. `index[r]` is the node id
// behind row r of the sub-matrix.
struct CorrelationFactor {
    Eigen::MatrixXd lower;
    std::vector<int> index;

    int dim() const { return static_cast<int>(index.size()); }
};

// Throws NotPositiveSemidefinite for matrices that are not valid correlation
// matrices. Semi-definite (singular) inputs are accepted; no jitter is added.
CorrelationFactor cholesky_factor(const Eigen::MatrixXd& sigma_sub, std::vector<int> index = {});

// Principal sub-matrix over `nodes` (ascending ids) and its factor.
Eigen::MatrixXd correlation_submatrix(const Eigen::MatrixXd& sigma, NodeSet nodes);
CorrelationFactor factor_for(const Eigen::MatrixXd& sigma, NodeSet nodes);

struct LatentDraw {
    std::vector<double> x;       // one latent value per factor row
    std::vector<bool> defaults;  // x_r < Phi^{-1}(pd_r)
    NodeSet default_set;         // node ids (via the factor's index map)
};

// Phi^{-1}(pd), with +inf for pd >= 1 so certain defaults never depend on the draw.
double default_threshold(double pd);

// Fills `out` (size factor.dim()) with a correlated standard-normal vector.
void draw_latent(const CorrelationFactor& factor, RandomStream& rng, std::span<double> out);

// `pds` is indexed like the factor rows.
LatentDraw sample_defaults(std::span<const double> pds, const CorrelationFactor& factor, RandomStream& rng);

struct JointProbability {
    double probability = 0.0;
    double std_error = 0.0;  // zero for the exact route
};

enum class JointMethod { kExactSmall, kMonteCarlo };

struct JointProbOptions {
    JointMethod method = JointMethod::kExactSmall;
    std::int64_t samples = 1'000'000;
    std::uint64_t seed = 0;
};

// Probability that every node of `default_set` has x_i < Phi^{-1}(pds[i]) and
// every node of `survive_set` has x_i >= Phi^{-1}(pds[i]). Other nodes are
// integrated out. `pds` and `sigma` are indexed by node id. The exact route
// handles at most three constrained nodes.
JointProbability joint_default_prob(std::span<const double> pds, NodeSet default_set, NodeSet survive_set,
                                    const Eigen::MatrixXd& sigma, const JointProbOptions& options = {});

// P(X_i < upper_i for all i) for a standard normal vector with correlation
// `corr`, dimension <= 3. Infinite bounds are allowed.
double orthant_probability(std::span<const double> upper, const Eigen::MatrixXd& corr);

// Probabilities of every default pattern of a <= 3 node system. Entry `mask`
// is the probability that exactly the nodes whose local bit is set default.
std::vector<double> partition_probabilities(std::span<const double> pds, const Eigen::MatrixXd& corr);

}  // namespace bailout
