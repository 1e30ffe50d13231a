#include "bailout/ridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bailout/errors.hpp"
#include "bailout/random.hpp"

namespace bailout {

Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
    if (x.rows() != y.size()) throw DimensionError("ridge_solve: row count mismatch");
    const Eigen::Index p = x.cols();
    if (p == 0) return Eigen::VectorXd();
    if (x.rows() == 0) return Eigen::VectorXd::Zero(p);
    const double n = static_cast<double>(x.rows());
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += n * lambda;
    return gram.ldlt().solve(x.transpose() * y);
}

std::vector<double> default_lambda_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 12; ++i) grid.push_back(std::pow(10.0, -4.0 + 0.5 * i));
    return grid;
}

RidgeFit ridge_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const double> lambdas, int folds,
                  std::uint64_t seed, RidgeScaling scaling) {
    if (x.rows() != y.size()) throw DimensionError("ridge_cv: row count mismatch");
    if (lambdas.empty()) throw ConfigError("ridge_cv: empty lambda grid");
    if (folds < 2) throw ConfigError("ridge_cv: at least two folds required");
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();

    RidgeFit fit;
    fit.coef = Eigen::VectorXd::Zero(p);
    fit.lambda = *std::min_element(lambdas.begin(), lambdas.end());
    if (n == 0 || p == 0) return fit;

    Eigen::VectorXd scale(p);
    std::vector<Eigen::Index> used;
    for (Eigen::Index c = 0; c < p; ++c) {
        scale(c) = std::sqrt(x.col(c).squaredNorm() / static_cast<double>(n));
        if (scale(c) > 0.0) used.push_back(c);
    }
    if (used.empty()) {
        fit.cv_r2 = y.squaredNorm() == 0.0 ? 1.0 : 0.0;
        return fit;
    }
    if (scaling == RidgeScaling::kGlobal) {
        double ms = 0.0;
        for (Eigen::Index c : used) ms += scale(c) * scale(c);
        const double common = std::sqrt(ms / static_cast<double>(used.size()));
        for (Eigen::Index c : used) scale(c) = common;
    }
    Eigen::MatrixXd xs(n, static_cast<Eigen::Index>(used.size()));
    for (std::size_t c = 0; c < used.size(); ++c) xs.col(static_cast<Eigen::Index>(c)) = x.col(used[c]) / scale(used[c]);

    // Fewer rows than folds: leave-one-out.
    const int k = static_cast<int>(std::min<Eigen::Index>(folds, n));
    std::vector<int> fold(static_cast<std::size_t>(n));
    if (k >= 2) {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        RandomStream rng(seed, 0x5eed);
        for (Eigen::Index i = n - 1; i > 0; --i) {
            const auto j = static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
        for (Eigen::Index r = 0; r < n; ++r) fold[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = static_cast<int>(r % k);
    }

    if (k >= 2) {
        std::vector<double> grid(lambdas.begin(), lambdas.end());
        std::sort(grid.begin(), grid.end());
        std::vector<double> sses;
        for (double lambda : grid) {
            double sse = 0.0;
            for (int f = 0; f < k; ++f) {
                std::vector<Eigen::Index> train, test;
                for (Eigen::Index r = 0; r < n; ++r) (fold[static_cast<std::size_t>(r)] == f ? test : train).push_back(r);
                if (static_cast<Eigen::Index>(train.size()) < xs.cols()) fit.underdetermined = true;
                const Eigen::VectorXd b = ridge_solve(xs(train, Eigen::all), y(train), lambda);
                sse += (y(test) - xs(test, Eigen::all) * b).squaredNorm();
            }
            sses.push_back(sse);
            fit.cv_mse.push_back(sse / static_cast<double>(n));
        }
        const double best = *std::min_element(sses.begin(), sses.end());
        // Among (numerically) equal scores prefer the larger lambda.
        std::size_t pick = 0;
        for (std::size_t i = 0; i < sses.size(); ++i) {
            if (sses[i] <= best * (1.0 + 1e-12) + 1e-300) pick = i;
        }
        fit.lambda = grid[pick];
        const double y_mean = y.mean();
        const double sst = (y.array() - y_mean).square().sum();
        fit.cv_r2 = sst > 0.0 ? 1.0 - sses[pick] / sst : (sses[pick] == 0.0 ? 1.0 : 0.0);
    }

    const Eigen::VectorXd b = ridge_solve(xs, y, fit.lambda);
    for (std::size_t c = 0; c < used.size(); ++c) fit.coef(used[c]) = b(static_cast<Eigen::Index>(c)) / scale(used[c]);
    return fit;
}

}  // namespace bailout
