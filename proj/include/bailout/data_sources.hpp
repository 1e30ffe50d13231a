#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bailout/network.hpp"

namespace bailout {

inline constexpr double kAaaPdFloor = 0.00021;

// Krackhardt kite with 1-based labels "1".."10". With `complete_exposures`
// every ordered pair gets w_ij = 1 instead of kite edges only.
struct KiteOptions {
    double alpha = 0.01;
    double correlation = 0.5;
    bool complete_exposures = false;
};

// Undirected kite edges, 0-based.
std::vector<std::pair<int, int>> kite_edges();
FinancialNetwork build_kk_network(const KiteOptions& options = {});

struct EbaRecord {
    std::string symbol;
    std::string name;
    double total_asset = 0.0;  // billions EUR
    double equity = 0.0;
    double pd0 = 0.0;
};

// Comma-separated with header "symbol,W,E,PD,name". Blank lines and lines
// starting with '#' are skipped. Throws ParseError naming the offending row.
std::vector<EbaRecord> parse_eba(std::istream& in, const std::string& source = "<stream>");
std::vector<EbaRecord> load_eba(const std::string& path);
std::string default_eba_path();

// Iterative proportional fitting of a non-negative matrix with zero
// diagonal to the given row and column sums. `mask` (optional, same shape)
// marks the entries allowed to be non-zero.
struct IpfResult {
    Eigen::MatrixXd matrix;
    int sweeps = 0;
    double residual = 0.0;  // max relative margin error
};
IpfResult ipf_balance(const Eigen::VectorXd& row_sums, const Eigen::VectorXd& col_sums, const Eigen::MatrixXd& mask = {},
                      double tolerance = 1e-6, int max_sweeps = 10'000);

// Exposure matrix whose row and column margins are interbank_fraction * W.
// target_density < 1 keeps a seeded random subset of the off-diagonal
// pairs (every row and column keeps at least one).
Eigen::MatrixXd reconstruct_exposures(const std::vector<EbaRecord>& records, double interbank_fraction = 0.25,
                                      double target_density = 1.0, std::uint64_t seed = 7);

struct EbaOptions {
    std::string path;  // empty means the shipped fixture
    double alpha = 0.001;
    double lgd = 0.6;
    double correlation = 0.5;
    double interbank_fraction = 0.25;
    double target_density = 1.0;
    std::uint64_t seed = 7;
};

FinancialNetwork build_eba_network(const std::vector<EbaRecord>& records, const EbaOptions& options);

// JSON network file:
//   {"nodes": [{"label", "total_asset", "equity", "pd0" | "sigma", "mu", "lgd",
//               "alpha", "gov_investment", "pd_floor"}, ...],
//    "exposures": [[...], ...] | {"edges": [[i, j, w], ...]}   (1-based ids),
//    "correlation": 0.5 | [[...], ...]}
// Throws ConfigError / ParseError.
FinancialNetwork load_network_file(const std::string& path);
FinancialNetwork parse_network_json(const std::string& text);

// Halves every node's equity (W unchanged) and recalibrates sigma so each
// node keeps the PD it had before the cut.
FinancialNetwork halve_equity(const FinancialNetwork& net);

// Preset government stakes J_i(0), keyed by 0-based node id.
FinancialNetwork preset_investment(const FinancialNetwork& net, const std::map<int, double>& stakes);

void set_alpha(FinancialNetwork& net, double alpha);

}  // namespace bailout
