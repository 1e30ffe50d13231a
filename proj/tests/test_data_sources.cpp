#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "doctest.h"

#include "bailout/data_sources.hpp"
#include "bailout/errors.hpp"

using namespace bailout;

TEST_CASE("EBA fixture rows") {
    const auto rows = load_eba(default_eba_path());
    REQUIRE(rows.size() == 35);
    auto find = [&](const std::string& sym) {
        return *std::find_if(rows.begin(), rows.end(), [&](const EbaRecord& r) { return r.symbol == sym; });
    };
    const EbaRecord bfa = find("BFA");
    CHECK(bfa.total_asset == 235);
    CHECK(bfa.equity == 12);
    CHECK(bfa.pd0 == 0.0116);
    const EbaRecord han = find("HAN");
    CHECK(han.total_asset == 334);
    CHECK(han.equity == 11);
    CHECK(han.pd0 == 0.0004);
    CHECK(han.name == "Handelsbanken");
    const EbaRecord mps = find("MPS");
    CHECK(mps.total_asset == 201);
    CHECK(mps.pd0 == 0.0093);
    for (const EbaRecord& r : rows) {
        CHECK(r.total_asset > r.equity);
        CHECK(r.equity > 0.0);
        CHECK(r.pd0 > 0.0);
        CHECK(r.pd0 < 1.0);
    }
}

TEST_CASE("EBA parser errors name the row") {
    std::istringstream bad("symbol,W,E,PD,name\nAAA,100,5,0.01,Good\nBBB,abc,5,0.01,Bad\n");
    try {
        parse_eba(bad, "t.csv");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("t.csv:3") != std::string::npos);
        CHECK(msg.find("BBB") != std::string::npos);
    }
    std::istringstream inverted("symbol,W,E,PD,name\nAAA,5,100,0.01,Upside down\n");
    CHECK_THROWS_AS(parse_eba(inverted), ParseError);
    std::istringstream header("sym,W,E\n");
    CHECK_THROWS_AS(parse_eba(header), ParseError);
    std::istringstream comments("# note\nsymbol,W,E,PD,name\n\nAAA,100,5,0.01,A\n");
    CHECK(parse_eba(comments).size() == 1);
    CHECK_THROWS_AS(load_eba("/nonexistent/eba.csv"), ConfigError);
}

TEST_CASE("IPF small cases") {
    Eigen::VectorXd m(2);
    m << 3.0, 3.0;
    const IpfResult r = ipf_balance(m, m);
    CHECK(r.matrix(0, 0) == 0.0);
    CHECK(r.matrix(1, 1) == 0.0);
    CHECK(r.matrix(0, 1) == doctest::Approx(3.0));
    CHECK(r.matrix(1, 0) == doctest::Approx(3.0));

    const IpfResult z = ipf_balance(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3));
    CHECK(z.matrix.isZero(0.0));

    // A single node cannot lend to itself.
    CHECK_THROWS_AS(ipf_balance(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)), ConvergenceError);
}

TEST_CASE("IPF reproduces the EBA margins") {
    const auto rows = load_eba(default_eba_path());
    for (double density : {1.0, 0.3}) {
        const Eigen::MatrixXd w = reconstruct_exposures(rows, 0.25, density, 7);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            const double target = 0.25 * rows[i].total_asset;
            CHECK(std::abs(w.row(k).sum() - target) <= 1e-6 * target);
            CHECK(std::abs(w.col(k).sum() - target) <= 1e-6 * target);
            CHECK(w(k, k) == 0.0);
        }
        CHECK((w.array() >= 0.0).all());
    }
    const Eigen::MatrixXd sparse = reconstruct_exposures(rows, 0.25, 0.3, 7);
    const double nonzero = static_cast<double>((sparse.array() > 0.0).count());
    CHECK(nonzero < 0.5 * 35 * 34);
    CHECK(reconstruct_exposures(rows, 0.25, 0.3, 7) == sparse);
}

TEST_CASE("kite network") {
    const auto edges = kite_edges();
    CHECK(edges.size() == 18);
    std::vector<int> degree(10, 0);
    for (auto [a, b] : edges) {
        ++degree[static_cast<std::size_t>(a)];
        ++degree[static_cast<std::size_t>(b)];
    }
    // Krackhardt kite: node 4 is the hub (degree 6), node 10 the tail end (degree 1).
    CHECK(degree == std::vector<int>{4, 4, 3, 6, 3, 5, 5, 3, 2, 1});

    const FinancialNetwork net = build_kk_network();
    CHECK(net.size() == 10);
    CHECK(net.node(3).pd() == doctest::Approx(0.01).epsilon(1e-10));
    CHECK(net.node(0).pd() == doctest::Approx(0.001).epsilon(1e-10));
    CHECK(net.node(0).pd_floor == kAaaPdFloor);
    CHECK(net.correlation()(0, 1) == 0.5);
    CHECK(net.exposure(3, 0) == 1.0);
    CHECK(net.exposure(0, 3) == 1.0);
    CHECK(net.exposure(0, 9) == 0.0);
    CHECK(net.exposure().sum() == 36.0);

    KiteOptions complete;
    complete.complete_exposures = true;
    CHECK(build_kk_network(complete).exposure().sum() == 90.0);
}

TEST_CASE("network JSON") {
    const std::string text = R"({
        "nodes": [{"label": "A", "total_asset": 100, "equity": 3, "pd0": 0.01, "alpha": 0.02},
                  {"label": "B", "total_asset": 50, "equity": 5, "sigma": 0.05}],
        "exposures": {"edges": [[1, 2, 0.5]]},
        "correlation": 0.3})";
    const FinancialNetwork net = parse_network_json(text);
    CHECK(net.size() == 2);
    CHECK(net.node(0).pd() == doctest::Approx(0.01).epsilon(1e-10));
    CHECK(net.node(1).sigma == 0.05);
    CHECK(net.node(0).alpha == 0.02);
    CHECK(net.exposure(0, 1) == 0.5);
    CHECK(net.exposure(1, 0) == 0.0);
    CHECK(net.correlation()(1, 0) == 0.3);

    const std::string dense = R"({"nodes": [{"total_asset": 100, "equity": 3, "pd0": 0.01},
                                            {"total_asset": 100, "equity": 3, "pd0": 0.01}],
                                  "exposures": [[0, 1], [2, 0]], "correlation": [[1, 0.2], [0.2, 1]]})";
    CHECK(parse_network_json(dense).exposure(1, 0) == 2.0);

    CHECK_THROWS_AS(parse_network_json("{"), ParseError);
    CHECK_THROWS_AS(parse_network_json(R"({"nodes": [{"total_asset": 100, "equity": 3}], "exposures": [[0]], "correlation": 0})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_network_json(R"({"nodes": [{"total_asset": 100, "equity": 3, "pd0": 0.01}], "exposures": [[1]], "correlation": 0})"),
                    std::exception);
}

TEST_CASE("scenario transforms") {
    const FinancialNetwork net = build_kk_network();
    const FinancialNetwork half = halve_equity(net);
    for (int i = 0; i < net.size(); ++i) {
        CHECK(half.node(i).equity == doctest::Approx(0.5 * net.node(i).equity));
        CHECK(half.node(i).total_asset == net.node(i).total_asset);
    }
    const FinancialNetwork preset = preset_investment(net, {{9, 0.5}});
    CHECK(preset.node(9).gov_investment == 0.5);
    CHECK(preset.node(9).total_asset == net.node(9).total_asset);
    CHECK(preset.node(8).gov_investment == 0.0);
    FinancialNetwork copy = net;
    set_alpha(copy, 0.005);
    for (const BankNode& n : copy.nodes()) CHECK(n.alpha == 0.005);
}
