#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"

#include "bailout/copula.hpp"
#include "bailout/errors.hpp"
#include "bailout/normal.hpp"

using namespace bailout;

namespace {

Eigen::MatrixXd homogeneous(int n, double rho) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Constant(n, n, rho);
    s.diagonal().setOnes();
    return s;
}

// Oracle: P(X < h, Y < k) = int_{-inf}^{h} phi(x) Phi((k - r x) / sqrt(1 - r^2)) dx.
double bvn_by_conditioning(double h, double k, double r) {
    const double s = std::sqrt(1.0 - r * r);
    auto f = [&](double x) { return normal_pdf(x) * normal_cdf((k - r * x) / s); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -12.0, h, 20, 1e-14);
}

}  // namespace

TEST_CASE("cholesky_factor closed forms") {
    const CorrelationFactor id = cholesky_factor(Eigen::MatrixXd::Identity(3, 3));
    CHECK((id.lower - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-15);
    const CorrelationFactor f = cholesky_factor(homogeneous(2, 0.5));
    CHECK(f.lower(0, 0) == doctest::Approx(1.0));
    CHECK(f.lower(0, 1) == 0.0);
    CHECK(f.lower(1, 0) == doctest::Approx(0.5));
    CHECK(f.lower(1, 1) == doctest::Approx(std::sqrt(0.75)));
    CHECK_THROWS_AS(cholesky_factor(homogeneous(2, 1.5)), NotPositiveSemidefinite);
    // -0.6 off-diagonal on three nodes has a negative eigenvalue.
    CHECK_THROWS_AS(cholesky_factor(homogeneous(3, -0.6)), NotPositiveSemidefinite);
}

TEST_CASE("cholesky reproduces semi-definite and random matrices") {
    const Eigen::MatrixXd ones = homogeneous(3, 1.0);
    const CorrelationFactor f = cholesky_factor(ones);
    CHECK((f.lower * f.lower.transpose() - ones).norm() < 1e-10);
    RandomStream rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd a(4, 4);
        for (int i = 0; i < 16; ++i) a.data()[i] = rng.normal();
        Eigen::MatrixXd c = a * a.transpose();
        const Eigen::VectorXd d = c.diagonal().cwiseSqrt().cwiseInverse();
        c = d.asDiagonal() * c * d.asDiagonal();
        c.diagonal().setOnes();
        const CorrelationFactor g = cholesky_factor(c);
        CHECK((g.lower * g.lower.transpose() - c).norm() < 1e-10);
    }
    const CorrelationFactor sub = factor_for(homogeneous(5, 0.3), NodeSet{1, 4});
    CHECK(sub.index == std::vector<int>{1, 4});
}

TEST_CASE("bivariate CDF against conditioning quadrature") {
    for (double r : {-0.95, -0.5, -0.1, 0.2, 0.5, 0.9, 0.93, 0.99, 0.9999}) {
        for (double h : {-3.0, -2.3, -0.5, 0.0, 1.2}) {
            for (double k : {-2.8, -1.0, 0.3, 2.0}) {
                const double want = bvn_by_conditioning(h, k, r);
                CHECK(std::abs(bivariate_normal_cdf(h, k, r) - want) <= 1e-12 + 1e-9 * want);
            }
        }
    }
}

TEST_CASE("sample_defaults edge cases and frequencies") {
    const CorrelationFactor f3 = cholesky_factor(homogeneous(3, 0.5));
    RandomStream rng(1);
    const std::vector<double> certain{1.0, 1.0, 1.0};
    for (int i = 0; i < 100; ++i) CHECK(sample_defaults(certain, f3, rng).default_set.size() == 3);
    const std::vector<double> bad{0.1, 0.1};
    CHECK_THROWS_AS(sample_defaults(bad, f3, rng), DimensionError);

    const CorrelationFactor f1 = cholesky_factor(Eigen::MatrixXd::Identity(1, 1));
    const std::vector<double> p{0.3};
    int hits = 0;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) hits += sample_defaults(p, f1, rng).defaults[0] ? 1 : 0;
    CHECK(std::abs(hits / double(n) - 0.3) <= 3.0 * std::sqrt(0.3 * 0.7 / n));

    const CorrelationFactor f2 = cholesky_factor(Eigen::MatrixXd::Identity(2, 2));
    const std::vector<double> half{0.5, 0.5};
    hits = 0;
    for (int i = 0; i < n; ++i) hits += sample_defaults(half, f2, rng).default_set.size() == 2 ? 1 : 0;
    CHECK(std::abs(hits / double(n) - 0.25) <= 3.0 * std::sqrt(0.25 * 0.75 / n));
}

TEST_CASE("joint_default_prob exact route") {
    const std::vector<double> p1{0.07};
    CHECK(joint_default_prob(p1, NodeSet{0}, {}, Eigen::MatrixXd::Identity(1, 1)).probability == doctest::Approx(0.07).epsilon(1e-12));
    const std::vector<double> pq{0.03, 0.2};
    CHECK(std::abs(joint_default_prob(pq, NodeSet{0, 1}, {}, Eigen::MatrixXd::Identity(2, 2)).probability - 0.006) < 1e-8);
    CHECK(std::abs(joint_default_prob(pq, NodeSet{0}, NodeSet{1}, Eigen::MatrixXd::Identity(2, 2)).probability - 0.024) < 1e-8);

    const std::vector<double> pp{0.01, 0.01};
    const Eigen::MatrixXd s = homogeneous(2, 0.5);
    const double exact = joint_default_prob(pp, NodeSet{0, 1}, {}, s).probability;
    const JointProbability mc = joint_default_prob(pp, NodeSet{0, 1}, {}, s, {JointMethod::kMonteCarlo, 10'000'000, 9});
    CHECK(std::abs(exact - mc.probability) <= 3.0 * mc.std_error);
    CHECK(exact > 0.0001);  // positive dependence raises the joint tail

    const std::vector<double> four{0.1, 0.1, 0.1, 0.1};
    CHECK_THROWS_AS(joint_default_prob(four, NodeSet{0, 1, 2, 3}, {}, homogeneous(4, 0.2)), DimensionError);
    // Unconstrained nodes are integrated out.
    CHECK(joint_default_prob(four, NodeSet{2}, {}, homogeneous(4, 0.2)).probability == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("partition normalisation, comonotone limit, monotonicity") {
    RandomStream rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + trial % 3;
        std::vector<double> pds(static_cast<std::size_t>(n));
        for (double& p : pds) p = 0.001 + 0.3 * rng.uniform();
        const Eigen::MatrixXd s = homogeneous(n, -0.4 + 1.3 * rng.uniform() * (n == 3 ? 0.9 : 1.0));
        const auto probs = partition_probabilities(pds, s);
        double total = 0.0;
        for (double q : probs) total += q;
        CHECK(std::abs(total - 1.0) < 1e-6);
        // Same numbers through the rectangle route.
        for (int mask = 0; mask < (1 << n); ++mask) {
            NodeSet d, sv;
            for (int i = 0; i < n; ++i) ((mask >> i) & 1 ? d : sv).insert(i);
            CHECK(std::abs(joint_default_prob(pds, d, sv, s).probability - probs[static_cast<std::size_t>(mask)]) < 1e-8);
        }
    }
    const std::vector<double> eq{0.05, 0.05};
    CHECK(std::abs(joint_default_prob(eq, NodeSet{0, 1}, {}, homogeneous(2, 0.9999)).probability - 0.05) < 1e-3);
    const std::vector<double> eq3{0.05, 0.05, 0.05};
    CHECK(std::abs(joint_default_prob(eq3, NodeSet{0, 1, 2}, {}, homogeneous(3, 0.9999)).probability - 0.05) < 1e-3);

    const Eigen::MatrixXd s3 = homogeneous(3, 0.5);
    double prev = 0.0;
    for (double p = 0.001; p < 0.5; p *= 1.5) {
        const std::vector<double> pds{p, 0.02, 0.1};
        const double v = joint_default_prob(pds, NodeSet{0, 1, 2}, {}, s3).probability;
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
}

TEST_CASE("trivariate rectangle against Monte Carlo") {
    const std::vector<double> pds{0.05, 0.1, 0.2};
    Eigen::MatrixXd s(3, 3);
    s << 1, 0.3, 0.6, 0.3, 1, -0.2, 0.6, -0.2, 1;
    for (int mask = 0; mask < 8; ++mask) {
        NodeSet d, sv;
        for (int i = 0; i < 3; ++i) ((mask >> i) & 1 ? d : sv).insert(i);
        const double exact = joint_default_prob(pds, d, sv, s).probability;
        const JointProbability mc = joint_default_prob(pds, d, sv, s, {JointMethod::kMonteCarlo, 1'000'000, 100 + std::uint64_t(mask)});
        CHECK(std::abs(exact - mc.probability) <= 3.5 * std::max(mc.std_error, 1e-7));
    }
}
