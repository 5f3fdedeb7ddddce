#pragma once

// Maximum-likelihood subset selector. The relevant set F (|F| = p) is a model
// parameter: classes are Gaussian on F, and the complement E is a class-free
// Gaussian regression on F. Fitted by alternating M-, S- and T-steps with
// impartial trimming.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robsel/common.hpp"
#include "robsel/genetic.hpp"
#include "robsel/model.hpp"

namespace robsel {

struct SubsetPartition {
    std::vector<int> relevant;    // F, sorted
    std::vector<int> irrelevant;  // E, sorted

    static SubsetPartition from_relevant(std::vector<int> relevant, int n_vars);
};

/// x_E | x_F ~ N(mean + coef * x_F, covariance), shared by all classes.
struct ConditionalLink {
    Eigen::MatrixXd coef;        // |E| x |F|
    Eigen::VectorXd mean;        // |E|
    Eigen::MatrixXd covariance;  // |E| x |E|, may be singular
};

enum class SubsetSearch { Auto, Exhaustive, Genetic, ClosedForm };
std::string_view to_string(SubsetSearch s);
SubsetSearch parse_subset_search(std::string_view s);

struct MlSubsetOptions {
    CovarianceModel model = CovarianceModel::VVV;
    double gamma = 0.05;
    int n_init = 20;
    int max_iter = 100;
    std::uint64_t seed = 0;
    SubsetSearch search = SubsetSearch::Auto;
    GaOptions ga;
    int threads = 1;
};

struct MlSubsetFit {
    SubsetPartition partition;
    ClassParams params;  // full dimension, with pooled fields
    ConditionalLink link;
    TrimmingState trimming;
    double objective = 0.0;
    int n_init_used = 0;
    int best_init = 0;
    int failed_inits = 0;
    int iterations = 0;
    bool converged = false;
    bool stopped_on_decrease = false;
    std::vector<double> objective_trace;
};

/// Per-row value of log(tau_g phi(x_F; mu_gF, Sigma_gF)) + log phi(x_E - G x_F; mu_E|F, Sigma_E|F).
std::vector<double> joint_row_loglik(const LabeledDataset& data, const SubsetPartition& partition,
                                     const ClassParams& params, const ConditionalLink& link);
/// Trimmed joint log-likelihood: the row values summed over the kept rows.
double joint_trimmed_loglik(const LabeledDataset& data, const SubsetPartition& partition, const ClassParams& params,
                            const ConditionalLink& link, const TrimmingState& keep);

struct SubsetInit {
    TrimmingState keep;
    std::optional<std::vector<int>> relevant;  // only for the small-N branch
    bool large_sample = false;
};

/// Large-N branch (N > 2G(P+1), every class with P+1 rows): keep G random (P+1)-subsets.
/// Otherwise keep G random (p+1)-subsets, draw F0, and re-trim by the restricted own-class density.
SubsetInit robust_init(const LabeledDataset& data, int p, double gamma, std::uint64_t seed,
                       CovarianceModel model = CovarianceModel::VVV);

/// Class parameters on all P variables plus pooled mean and covariance of the kept rows.
ClassParams m_step(const LabeledDataset& data, const TrimmingState& keep, CovarianceModel model);

/// h(F) = sum_g tau_g log det Sigma_g,F - log det Sigma_F (pooled).
double h_objective(const ClassParams& params, std::span<const int> relevant, bool* floored = nullptr);

struct SStepResult {
    std::vector<int> relevant;
    double value = 0.0;
    SubsetSearch method = SubsetSearch::Auto;
};

/// Minimizes h over p-subsets. Auto: diagonal closed form for VVI/EEI, exhaustive
/// when C(P, p) <= 20000, genetic otherwise. `current` seeds the genetic search.
SStepResult s_step(const ClassParams& params, int p, CovarianceModel model, SubsetSearch search, const GaOptions& ga,
                   std::uint64_t seed, const std::vector<int>& current = {});

/// Per-variable sum_g tau_g log(Sigma_g(k,k) / Sigma_pooled(k,k)) used by the diagonal closed forms.
Eigen::VectorXd diagonal_relevance_scores(const ClassParams& params);

ConditionalLink conditional_link(const ClassParams& params, const SubsetPartition& partition);

struct TStepResult {
    ConditionalLink link;
    TrimmingState keep;
};
TStepResult t_step(const LabeledDataset& data, const ClassParams& params, std::span<const int> relevant, double gamma);

MlSubsetFit fit_ml_subset(const LabeledDataset& data, int p, const MlSubsetOptions& options);

/// Number of p-subsets of P, saturating at INT64_MAX.
std::int64_t n_choose_k(int n, int k);

}  // namespace robsel
