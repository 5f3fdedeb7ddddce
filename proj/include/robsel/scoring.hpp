#pragma once

// Marginal-density outlier scoring of unlabeled rows on the retained variables.

#include <span>
#include <vector>

#include "robsel/ml_subset.hpp"
#include "robsel/model.hpp"
#include "robsel/redda.hpp"

namespace robsel {

struct OutlierScores {
    std::vector<double> log_density;  // log sum_g tau_g phi(y_F; mu_gF, Sigma_gF)
    std::vector<int> ranking;         // row indices, lowest density (most suspicious) first

    /// The first k entries of the ranking.
    std::vector<int> flagged(int k) const;
};

/// `params` live on the retained variables; `columns` picks those variables out of `test`.
OutlierScores outlier_score(const ClassParams& params, std::span<const int> columns, const Eigen::MatrixXd& test);
/// A REDDA fit trained on `columns` of the original table.
OutlierScores outlier_score(const ReddaFit& fit, std::span<const int> columns, const Eigen::MatrixXd& test);
/// Uses the restriction of the full-dimension class parameters to the selected subset.
OutlierScores outlier_score(const MlSubsetFit& fit, const Eigen::MatrixXd& test);

}  // namespace robsel
