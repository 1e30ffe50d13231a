#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace bailout {

struct RidgeFit {
    Eigen::VectorXd coef;  // in the original (unscaled) feature units
    double lambda = 0.0;
    double cv_r2 = 0.0;
    std::vector<double> cv_mse;  // one per lambda in the grid
    bool underdetermined = false;  // a training fold had fewer rows than features
};

// Minimises (1/n)|y - X b|^2 + lambda |b|^2 for one lambda. No intercept.
Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda);

// How features are scaled before the penalty is applied. kPerColumn divides
// each column by its own RMS; kGlobal divides every column by the RMS of the
// whole matrix, so each coefficient pays the same price for moving.
enum class RidgeScaling { kPerColumn, kGlobal };

// Ridge without intercept on RMS-scaled columns, lambda picked by k-fold
// cross-validation (folds assigned by a seeded shuffle). All-zero columns get
// a zero coefficient.
RidgeFit ridge_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const double> lambdas, int folds,
                  std::uint64_t seed, RidgeScaling scaling = RidgeScaling::kPerColumn);

// 13 points log-spaced over [1e-4, 1e2].
std::vector<double> default_lambda_grid();

}  // namespace bailout
