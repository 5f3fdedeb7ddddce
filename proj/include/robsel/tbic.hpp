#pragma once

// Greedy forward/backward variable selection scored by the trimmed BIC of two
// competing models: Grouping (the proposed variable carries class information
// beyond the included ones) and No-Grouping (it is a regression on a subset of
// the included ones).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "robsel/common.hpp"
#include "robsel/model.hpp"
#include "robsel/regression.hpp"

namespace robsel {

struct TbicOptions {
    CovarianceModel model = CovarianceModel::VVV;
    double gamma = 0.05;
    int n_start = 10;  // random starts per Grouping / No-Grouping fit
    int max_iter = 100;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct TbicScore {
    double score = 0.0;              // 2 * trimmed loglik - n_params * log(n_kept)
    double classification_loglik = 0.0;
    double regression_loglik = 0.0;  // No-Grouping only
    int n_params = 0;
    int n_kept = 0;
    TrimmingState trimming;
    std::vector<int> regressors;     // No-Grouping only
    bool converged = false;
};

/// Trimmed BIC of the Grouping model on columns `included` + {p_var}.
TbicScore tbic_grouping(const LabeledDataset& data, std::span<const int> included, int p_var, const TbicOptions& options);
/// Trimmed BIC of the No-Grouping model: classifier on `included`, regression of p_var on a BIC-chosen subset.
TbicScore tbic_nogrouping(const LabeledDataset& data, std::span<const int> included, int p_var, const TbicOptions& options);

/// Scores recomputed from a fixed trimming state (estimation on the kept rows, no concentration).
TbicScore grouping_score_at(const LabeledDataset& data, std::span<const int> included, int p_var,
                            const TrimmingState& keep, CovarianceModel model);
TbicScore nogrouping_score_at(const LabeledDataset& data, std::span<const int> included, int p_var,
                              const TrimmingState& keep, CovarianceModel model);

enum class StepKind { Add, Remove };
std::string_view to_string(StepKind kind);

struct StepRecord {
    StepKind kind = StepKind::Add;
    int variable = -1;                   // proposal (0-based column), -1 when nothing to propose
    std::vector<int> included_before;    // inclusion order
    double tbic_grouping = 0.0;
    double tbic_nogrouping = 0.0;
    double difference = 0.0;             // grouping - nogrouping
    bool accepted = false;
    std::vector<int> grouping_discarded;
    std::vector<int> nogrouping_discarded;
    std::vector<int> regressors;
    /// (variable, difference) for every variable evaluated in the stage.
    std::vector<std::pair<int, double>> candidates;
};

struct SelectionResult {
    std::vector<int> selected;  // 0-based columns in inclusion order
    std::vector<StepRecord> steps;
    std::string diagnostic;
    int n_evaluations = 0;
};

/// Alternates an addition stage (best candidate by TBIC(GR) - TBIC(NG), accepted when > 0)
/// and a removal stage (included variable with the smallest difference, removed when < 0)
/// until two consecutive stages are rejected, or 2P stages have run.
SelectionResult greedy_select(const LabeledDataset& data, const TbicOptions& options);

}  // namespace robsel
