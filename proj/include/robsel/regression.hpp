#pragma once

// Trimmed Gaussian linear regression used by the No-Grouping model.

#include <vector>

#include <Eigen/Dense>

#include "robsel/common.hpp"

namespace robsel {

struct RegressionParams {
    double intercept = 0.0;
    Eigen::VectorXd beta;         // one coefficient per column of the design (0 for dropped columns)
    double sigma2 = 1.0;          // residual sum of squares over the kept count, floored
    std::vector<int> regressors;  // data columns used as regressors (empty for intercept-only)
    std::vector<int> dropped;     // positions in the design dropped as collinear

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    /// log phi(y; alpha + beta'x, sigma2) for every row of the design.
    Eigen::VectorXd log_density(const Eigen::VectorXd& y, const Eigen::MatrixXd& design) const;
};

/// Least squares with intercept on the kept rows. Collinear columns (on the kept
/// rows) are dropped and get a zero coefficient.
RegressionParams ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, const TrimmingState& keep);

struct TrimmedRegression {
    RegressionParams params;
    TrimmingState keep;
    double trimmed_rss = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Least-trimmed-squares style fit: alternate OLS on the kept rows and discarding
/// the floor(N * gamma) largest squared residuals until the discarded set repeats.
TrimmedRegression trimmed_regression(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, double gamma,
                                     const TrimmingState& keep_init, int max_iter = 100);

/// Regressors for column `response` among `included`, chosen by BIC of the Gaussian
/// regression on the kept rows. Exhaustive over subsets when |included| <= 10,
/// forward stepwise otherwise.
std::vector<int> select_regressors(int response, std::span<const int> included, const Eigen::MatrixXd& x,
                                   const TrimmingState& keep);

/// BIC (2 loglik - (|r| + 2) log n) of the regression of `response` on `regressors` over the kept rows.
double regression_bic(int response, std::span<const int> regressors, const Eigen::MatrixXd& x, const TrimmingState& keep);

}  // namespace robsel
