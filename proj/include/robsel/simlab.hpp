#pragma once

// Simulation laboratory: the 16-variable, 4-class benchmark generator,
// label-noise and outlier contamination, metrics and experiment runners.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "robsel/common.hpp"
#include "robsel/model.hpp"

namespace robsel {

/// Columns 0-2 relevant, 3-6 redundant (regressed on columns 0 and 2), 7-15 irrelevant.
struct DgpSpec {
    std::vector<double> tau{0.15, 0.3, 0.2, 0.35};
    std::vector<Eigen::Vector3d> mu{{1.5, -1.5, 1.5}, {-1.5, 1.5, 1.5}, {1.5, -1.5, -1.5}, {-1.5, 1.5, -1.5}};
    std::vector<double> rho{0.85, 0.1, 0.65, 0.5};
    Eigen::Matrix<double, 2, 4> B = (Eigen::Matrix<double, 2, 4>() << 1, 0, -1, 0, 0, -2, 2, 1).finished();
    Eigen::VectorXd eta = (Eigen::VectorXd(9) << -2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2).finished();
    Eigen::VectorXd delta = (Eigen::VectorXd(9) << 0.5, 0.75, 1, 1.25, 1.5, 1.25, 1, 0.75, 0.5).finished();  // variances

    int n_classes() const { return static_cast<int>(tau.size()); }
    static constexpr int n_vars() { return 16; }
    Eigen::Matrix3d class_covariance(int g) const;
    /// Mean of the redundant block given class g: mu_g[{0, 2}] * B.
    Eigen::Vector4d redundant_mean(int g) const;
    void validate() const;
};

/// Indices of the truly relevant columns (0-based).
inline const std::vector<int>& relevant_columns() {
    static const std::vector<int> r{0, 1, 2};
    return r;
}

LabeledDataset generate_clean(int n, const DgpSpec& spec, std::uint64_t seed);

struct ContaminationSpec {
    int n_label_noise = 0;  // last rows of class 4 relabeled as class 3
    int n_outliers = 0;     // appended uniform rows
    double chi2_prob = 0.975;
    std::uint64_t seed = 0;
    double box_widening = 0.2;  // total widening of each column's [min, max]
    long max_draws = 1'000'000;  // per outlier row
};

struct Contaminated {
    LabeledDataset data;
    std::vector<int> relabeled;  // row indices
    std::vector<int> outliers;   // row indices of the appended rows
    std::vector<int> planted;    // union, sorted
    double rate = 0.0;           // (n_label_noise + n_outliers) / (N + n_outliers)
};

Contaminated contaminate(const LabeledDataset& data, const ContaminationSpec& spec, const DgpSpec& dgp = {});

/// True when a 16-vector clears all three squared-distance thresholds.
bool is_constrained_outlier(const Eigen::VectorXd& row, const DgpSpec& dgp, double chi2_prob);

/// |selected ∩ relevant| / |selected|; 0 for an empty selection.
double selection_precision(std::span<const int> selected, std::span<const int> relevant);
double misclassification_error(std::span<const int> predicted, std::span<const int> truth);

enum class Selector { Tbic, MlSubset, None };
std::string_view to_string(Selector s);
Selector parse_selector(std::string_view s);

struct MethodSpec {
    std::string name;
    Selector selector = Selector::Tbic;
    std::optional<double> gamma;  // empty: oracle level, the planted rate rounded up to a multiple of 1/N
    int p = 3;                    // ML subset only
};

struct Scenario {
    int n_label_noise = 20;
    int n_outliers = 5;
};

struct ExperimentConfig {
    int replications = 20;
    int n_train = 500;
    int n_test = 2000;
    std::vector<Scenario> scenarios{Scenario{}};
    std::vector<MethodSpec> methods;
    CovarianceModel model = CovarianceModel::VVV;
    int tbic_starts = 10;
    int ml_inits = 20;
    int classifier_starts = 20;
    bool classify = true;  // fit the downstream classifier and score the test set
    std::uint64_t seed = 0;
    int threads = 1;
    DgpSpec dgp;

    void validate() const;
};

struct ReplicationRecord {
    int scenario = 0;
    int method = 0;
    int replication = 0;
    double gamma = 0.0;
    std::vector<int> selected;  // sorted
    double precision = 0.0;
    std::optional<double> test_error;
    bool exact = false;  // selected == relevant
    std::string error;   // non-empty when the replication failed
};

struct CellSummary {
    int scenario = 0;
    int method = 0;
    int n_ok = 0;
    int n_failed = 0;
    int n_exact = 0;
    double mean_precision = 0.0;
    double sd_precision = 0.0;
    double median_precision = 0.0;
    std::optional<double> mean_error;
    std::optional<double> sd_error;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<ReplicationRecord> records;  // ordered by (scenario, replication, method)
    std::vector<CellSummary> cells;          // ordered by (scenario, method)
};

/// Seeds: clean data of replication r uses derive_seed(seed, r); the contamination of
/// scenario s uses derive_seed(that, 100 + s) and method m uses derive_seed(that, 1000 + 100 s + m).
ExperimentReport run_experiment(const ExperimentConfig& config);
std::vector<CellSummary> summarize(const ExperimentConfig& config, const std::vector<ReplicationRecord>& records);

struct GammaMonitorConfig {
    std::vector<double> grid;  // strictly descending
    Selector selector = Selector::Tbic;
    int p = 3;
    CovarianceModel model = CovarianceModel::VVV;
    int n_start = 10;  // TBIC starts or ML-subset initializations
    std::uint64_t seed = 0;
    int threads = 1;
};

struct GammaMonitorReport {
    std::vector<double> grid;
    std::vector<std::vector<int>> selections;  // as returned by the selector
    std::vector<double> distances;             // between consecutive grid points
    std::optional<int> first_unstable;         // grid index i with distances[i - 1] > 0
};

/// Size of the symmetric difference of two index sets.
int hamming_distance(std::span<const int> a, std::span<const int> b);
/// Edit distance of the sorted selections divided by the longer length.
double normalized_edit_distance(std::span<const int> a, std::span<const int> b);

GammaMonitorReport gamma_monitor(const LabeledDataset& data, const GammaMonitorConfig& config);

}  // namespace robsel
