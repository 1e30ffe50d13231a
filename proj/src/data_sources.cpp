#include "bailout/data_sources.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bailout/errors.hpp"
#include "bailout/random.hpp"

namespace bailout {

std::vector<std::pair<int, int>> kite_edges() {
    return {{0, 1}, {0, 2}, {0, 3}, {0, 5}, {1, 3}, {1, 4}, {1, 6}, {2, 3}, {2, 5},
            {3, 4}, {3, 5}, {3, 6}, {4, 6}, {5, 6}, {5, 7}, {6, 7}, {7, 8}, {8, 9}};
}

namespace {

Eigen::MatrixXd homogeneous_correlation(int n, double rho) {
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(n, n, rho);
    sigma.diagonal().setOnes();
    return sigma;
}

}  // namespace

FinancialNetwork build_kk_network(const KiteOptions& options) {
    constexpr int n = 10;
    std::vector<BankNode> nodes(n);
    std::vector<double> pd0(n, 0.001);
    for (int i : {3, 7, 9}) pd0[static_cast<std::size_t>(i)] = 0.01;
    for (int i = 0; i < n; ++i) {
        BankNode& node = nodes[static_cast<std::size_t>(i)];
        node.label = std::to_string(i + 1);
        node.total_asset = 100.0;
        node.equity = 3.0;
        node.mu = 0.0;
        node.lgd = 1.0;
        node.alpha = options.alpha;
        node.pd_floor = kAaaPdFloor;
        node.sigma = calibrate_sigma(node.total_asset, node.equity, node.mu, pd0[static_cast<std::size_t>(i)]);
    }
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    if (options.complete_exposures) {
        w.setOnes();
        w.diagonal().setZero();
    } else {
        for (auto [a, b] : kite_edges()) w(a, b) = w(b, a) = 1.0;
    }
    return FinancialNetwork(std::move(nodes), std::move(w), homogeneous_correlation(n, options.correlation));
}

std::vector<EbaRecord> parse_eba(std::istream& in, const std::string& source) {
    std::vector<EbaRecord> out;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            if (line.rfind("symbol", 0) == 0) continue;
        }
        std::vector<std::string> cells;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        const std::string where = source + ":" + std::to_string(line_no) + " (\"" + line + "\")";
        if (cells.size() < 4) throw ParseError("malformed EBA row " + where + ": expected symbol,W,E,PD,name");
        EbaRecord r;
        r.symbol = cells[0];
        r.name = cells.size() > 4 ? cells[4] : cells[0];
        try {
            std::size_t used = 0;
            r.total_asset = std::stod(cells[1], &used);
            if (used != cells[1].size()) throw std::invalid_argument("W");
            r.equity = std::stod(cells[2], &used);
            if (used != cells[2].size()) throw std::invalid_argument("E");
            r.pd0 = std::stod(cells[3], &used);
            if (used != cells[3].size()) throw std::invalid_argument("PD");
        } catch (const std::exception&) {
            throw ParseError("malformed EBA row " + where + ": non-numeric W, E or PD");
        }
        if (r.symbol.empty() || !(r.total_asset > r.equity && r.equity > 0.0) || !(r.pd0 > 0.0 && r.pd0 < 1.0)) {
            throw ParseError("invalid EBA row " + where + ": need W > E > 0 and 0 < PD < 1");
        }
        out.push_back(std::move(r));
    }
    if (out.empty()) throw ParseError(source + ": no EBA rows");
    return out;
}

std::vector<EbaRecord> load_eba(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open EBA table " + path);
    return parse_eba(in, path);
}

std::string default_eba_path() { return std::string(BAILOUT_DATA_DIR) + "/eba_gsii_2014.csv"; }

IpfResult ipf_balance(const Eigen::VectorXd& row_sums, const Eigen::VectorXd& col_sums, const Eigen::MatrixXd& mask,
                      double tolerance, int max_sweeps) {
    const Eigen::Index n = row_sums.size();
    if (col_sums.size() != n) throw DimensionError("ipf_balance: margin sizes differ");
    if ((row_sums.array() < 0.0).any() || (col_sums.array() < 0.0).any()) throw DomainError("ipf_balance: negative margin");
    IpfResult out;
    if (mask.size() == 0) out.matrix = Eigen::MatrixXd::Ones(n, n);
    else out.matrix = mask.cwiseMax(0.0).cwiseMin(1.0);
    if (out.matrix.rows() != n || out.matrix.cols() != n) throw DimensionError("ipf_balance: mask must be N x N");
    out.matrix.diagonal().setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (row_sums(i) == 0.0) out.matrix.row(i).setZero();
        if (col_sums(i) == 0.0) out.matrix.col(i).setZero();
    }
    auto residual = [&] {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double r = out.matrix.row(i).sum(), c = out.matrix.col(i).sum();
            if (row_sums(i) > 0.0) worst = std::max(worst, std::abs(r - row_sums(i)) / row_sums(i));
            else worst = std::max(worst, r);
            if (col_sums(i) > 0.0) worst = std::max(worst, std::abs(c - col_sums(i)) / col_sums(i));
            else worst = std::max(worst, c);
        }
        return worst;
    };
    out.residual = residual();
    while (out.residual > tolerance && out.sweeps < max_sweeps) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double r = out.matrix.row(i).sum();
            if (r > 0.0) out.matrix.row(i) *= row_sums(i) / r;
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            const double c = out.matrix.col(j).sum();
            if (c > 0.0) out.matrix.col(j) *= col_sums(j) / c;
        }
        ++out.sweeps;
        out.residual = residual();
    }
    if (out.residual > tolerance) {
        throw ConvergenceError("ipf_balance: no convergence after " + std::to_string(out.sweeps) +
                               " sweeps, max relative margin error " + std::to_string(out.residual));
    }
    return out;
}

Eigen::MatrixXd reconstruct_exposures(const std::vector<EbaRecord>& records, double interbank_fraction, double target_density,
                                      std::uint64_t seed) {
    if (!(interbank_fraction >= 0.0 && interbank_fraction < 1.0)) throw ConfigError("interbank_fraction must lie in [0, 1)");
    if (!(target_density > 0.0 && target_density <= 1.0)) throw ConfigError("target_density must lie in (0, 1]");
    const auto n = static_cast<Eigen::Index>(records.size());
    Eigen::VectorXd margins(n);
    for (Eigen::Index i = 0; i < n; ++i) margins(i) = interbank_fraction * records[static_cast<std::size_t>(i)].total_asset;
    Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(n, n);
    if (target_density < 1.0) {
        RandomStream rng(seed, 0xEBA);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) mask(i, j) = (i != j && rng.uniform() < target_density) ? 1.0 : 0.0;
        }
        // Keep a ring so no row or column is empty.
        for (Eigen::Index i = 0; i < n && n > 1; ++i) mask(i, (i + 1) % n) = 1.0;
    }
    return ipf_balance(margins, margins, mask).matrix;
}

FinancialNetwork build_eba_network(const std::vector<EbaRecord>& records, const EbaOptions& options) {
    const auto n = static_cast<int>(records.size());
    std::vector<BankNode> nodes(records.size());
    for (int i = 0; i < n; ++i) {
        const EbaRecord& r = records[static_cast<std::size_t>(i)];
        BankNode& node = nodes[static_cast<std::size_t>(i)];
        node.label = r.symbol;
        node.total_asset = r.total_asset;
        node.equity = r.equity;
        node.mu = 0.0;
        node.lgd = options.lgd;
        node.alpha = options.alpha;
        node.pd_floor = kAaaPdFloor;
        node.sigma = calibrate_sigma(r.total_asset, r.equity, 0.0, r.pd0);
    }
    Eigen::MatrixXd w = reconstruct_exposures(records, options.interbank_fraction, options.target_density, options.seed);
    return FinancialNetwork(std::move(nodes), std::move(w), homogeneous_correlation(n, options.correlation));
}

namespace {

using nlohmann::json;

double number_or(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_number()) throw ConfigError(std::string("network file: \"") + key + "\" must be a number");
    return obj.at(key).get<double>();
}

Eigen::MatrixXd dense_matrix(const json& rows, int n, const char* what) {
    if (!rows.is_array() || static_cast<int>(rows.size()) != n) {
        throw ConfigError(std::string("network file: \"") + what + "\" must have " + std::to_string(n) + " rows");
    }
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
        const json& row = rows[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<int>(row.size()) != n) {
            throw ConfigError(std::string("network file: row ") + std::to_string(i + 1) + " of \"" + what + "\" has the wrong length");
        }
        for (int j = 0; j < n; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
    return m;
}

}  // namespace

FinancialNetwork parse_network_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("network file: ") + e.what());
    }
    try {
        if (!doc.contains("nodes") || !doc.at("nodes").is_array() || doc.at("nodes").empty()) {
            throw ConfigError("network file: \"nodes\" must be a non-empty array");
        }
        const int n = static_cast<int>(doc.at("nodes").size());
        std::vector<BankNode> nodes(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const json& src = doc.at("nodes")[static_cast<std::size_t>(i)];
            BankNode& node = nodes[static_cast<std::size_t>(i)];
            node.label = src.value("label", std::to_string(i + 1));
            node.total_asset = number_or(src, "total_asset", 0.0);
            node.equity = number_or(src, "equity", 0.0);
            node.mu = number_or(src, "mu", 0.0);
            node.lgd = number_or(src, "lgd", 1.0);
            node.alpha = number_or(src, "alpha", 0.0);
            node.gov_investment = number_or(src, "gov_investment", 0.0);
            node.pd_floor = number_or(src, "pd_floor", kAaaPdFloor);
            if (!(node.total_asset > 0.0 && node.equity > 0.0 && node.equity <= node.total_asset)) {
                throw ConfigError("network file: node " + node.label + " needs 0 < equity <= total_asset");
            }
            if (node.lgd < 0.0 || node.lgd > 1.0 || node.alpha < 0.0 || node.alpha > 1.0 || node.gov_investment < 0.0 ||
                !(node.pd_floor > 0.0 && node.pd_floor < 1.0)) {
                throw ConfigError("network file: node " + node.label + " has lgd/alpha/gov_investment/pd_floor out of range");
            }
            if (src.contains("sigma")) {
                node.sigma = number_or(src, "sigma", 0.0);
            } else if (src.contains("pd0")) {
                node.sigma = calibrate_sigma(node.total_asset, node.equity, node.mu, number_or(src, "pd0", 0.0));
            } else {
                throw ConfigError("network file: node " + node.label + " needs \"pd0\" or \"sigma\"");
            }
        }
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
        if (doc.contains("exposures")) {
            const json& e = doc.at("exposures");
            if (e.is_object()) {
                for (const json& edge : e.at("edges")) {
                    if (!edge.is_array() || edge.size() != 3) throw ConfigError("network file: edges are [i, j, w]");
                    const int i = edge[0].get<int>() - 1, j = edge[1].get<int>() - 1;
                    if (i < 0 || j < 0 || i >= n || j >= n) throw ConfigError("network file: edge id out of range");
                    w(i, j) = edge[2].get<double>();
                }
            } else {
                w = dense_matrix(e, n, "exposures");
            }
        }
        Eigen::MatrixXd sigma;
        const json corr = doc.value("correlation", json(0.0));
        if (corr.is_number()) {
            sigma = homogeneous_correlation(n, corr.get<double>());
        } else {
            sigma = dense_matrix(corr, n, "correlation");
        }
        return FinancialNetwork(std::move(nodes), std::move(w), std::move(sigma));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("network file: ") + e.what());
    }
}

FinancialNetwork load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open network file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_network_json(buffer.str());
}

FinancialNetwork halve_equity(const FinancialNetwork& net) {
    FinancialNetwork out = net;
    for (BankNode& node : out.mutable_nodes()) {
        const double pd = node.pd();
        node.equity *= 0.5;
        node.sigma = calibrate_sigma(node.total_asset, node.equity, node.mu, pd);
    }
    return out;
}

FinancialNetwork preset_investment(const FinancialNetwork& net, const std::map<int, double>& stakes) {
    FinancialNetwork out = net;
    for (auto [id, amount] : stakes) {
        if (id < 0 || id >= out.size()) throw ConfigError("preset investment: node " + std::to_string(id + 1) + " out of range");
        if (amount < 0.0) throw ConfigError("preset investment must be non-negative");
        out.node(id).gov_investment = amount;
    }
    return out;
}

void set_alpha(FinancialNetwork& net, double alpha) {
    for (BankNode& node : net.mutable_nodes()) node.alpha = alpha;
}

}  // namespace bailout
