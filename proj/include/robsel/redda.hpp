#pragma once

// Robust eigenvalue-decomposition discriminant analysis: patterned Gaussian
// classifier fit by maximizing a trimmed log-likelihood with concentration steps.

#include <cstdint>
#include <vector>

#include "robsel/common.hpp"
#include "robsel/model.hpp"

namespace robsel {

struct ReddaOptions {
    CovarianceModel model = CovarianceModel::VVV;
    double gamma = 0.05;
    int n_start = 50;
    int max_iter = 200;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct ReddaFit {
    ClassParams params;
    TrimmingState trimming;
    CovarianceModel model = CovarianceModel::VVV;
    double trimmed_loglik = 0.0;
    int n_iterations = 0;
    bool converged = false;
    bool stopped_on_decrease = false;  // a C-step would have lowered the objective
    /// Trimmed log-likelihood per iteration of the winning start.
    std::vector<double> loglik_trace;
    int best_start = 0;
    int failed_starts = 0;
};

/// log phi(x_n; mu_g, Sigma_g) with g the observed label of row n.
std::vector<double> own_class_log_density(const ClassParams& params, const LabeledDataset& data);

/// Sum over kept rows of log(tau_g * phi(x_n; mu_g, Sigma_g)) at the observed label.
double trimmed_loglik(const ClassParams& params, const LabeledDataset& data, const TrimmingState& keep);

/// Discards the floor(N * gamma) rows with the lowest own-class density. Mixing
/// proportions play no role; ties discard the lowest row index first.
TrimmingState c_step(const ClassParams& params, const LabeledDataset& data, double gamma);

/// Keeps min(size, n_g) random rows of every class.
TrimmingState random_class_subsets(std::span<const int> labels, int n_classes, int size, double gamma, Rng& rng);

/// Single concentration run from a given initial kept set.
ReddaFit fit_redda_from(const LabeledDataset& data, const TrimmingState& initial, CovarianceModel model, double gamma,
                        int max_iter);

/// Best of `n_start` random (P+1)-per-class starts by trimmed log-likelihood.
/// With gamma = 0 a single start on all rows is used (the fit is then the plain MLE).
ReddaFit fit_redda(const LabeledDataset& data, const ReddaOptions& options);

struct Prediction {
    Eigen::MatrixXd posterior;  // M x G, rows sum to one
    std::vector<int> labels;    // 0-based MAP labels, lowest index on ties
};

Prediction predict_map(const ClassParams& params, const Eigen::MatrixXd& test);
Prediction predict_map(const ReddaFit& fit, const Eigen::MatrixXd& test);

struct TrimmedAssignment {
    int row = 0;
    int label = 0;
};

/// MAP class (tau_g * phi) for every trimmed training row.
std::vector<TrimmedAssignment> reassign_trimmed(const ReddaFit& fit, const LabeledDataset& data);

}  // namespace robsel
