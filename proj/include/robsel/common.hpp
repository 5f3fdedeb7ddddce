#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace robsel {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* category() const noexcept = 0;
};

// Bad input: shapes, ranges, malformed files.
class ValidationError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "validation"; }
};

// A fit could not be produced (empty class, degenerate covariance, all starts failed).
class EstimationError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "estimation"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* category() const noexcept override { return "io"; }
};

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a master seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// N x P feature matrix with 0-based class labels in [0, n_classes).
struct LabeledDataset {
    Eigen::MatrixXd x;
    std::vector<int> labels;
    int n_classes = 0;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;
    std::vector<std::string> row_ids;

    int rows() const { return static_cast<int>(x.rows()); }
    int cols() const { return static_cast<int>(x.cols()); }

    /// Throws ValidationError when labels and matrix disagree.
    void validate() const;
    std::vector<int> class_counts() const;
};

/// Copy of `data` restricted to `columns` (0-based, in the given order).
LabeledDataset select_columns(const LabeledDataset& data, std::span<const int> columns);
Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, std::span<const int> columns);

/// Number of rows discarded at trimming level gamma: floor(N * gamma).
int trimmed_count(int n, double gamma);
/// Number of rows kept: ceil(N * (1 - gamma)) == N - floor(N * gamma).
int kept_count(int n, double gamma);

/// Binary keep/discard vector over training rows.
struct TrimmingState {
    std::vector<std::uint8_t> keep;
    double gamma = 0.0;

    static TrimmingState all(int n, double gamma = 0.0);
    static TrimmingState from_kept(int n, std::span<const int> kept_rows, double gamma);

    int size() const { return static_cast<int>(keep.size()); }
    int n_kept() const;
    int n_discarded() const { return size() - n_kept(); }
    bool kept(int row) const { return keep[static_cast<std::size_t>(row)] != 0; }
    std::vector<int> discarded() const;
    std::vector<int> kept_rows() const;

    /// True when the discarded count equals floor(N * gamma).
    bool exact() const { return n_discarded() == trimmed_count(size(), gamma); }

    friend bool operator==(const TrimmingState& a, const TrimmingState& b) { return a.keep == b.keep; }
};

/// Discards the floor(N * gamma) rows with the lowest score. Ties discard the lowest row index first.
TrimmingState trim_lowest(std::span<const double> score, double gamma);

/// `k` distinct indices drawn uniformly from `pool` (order of the returned vector follows `pool`).
std::vector<int> sample_without_replacement(std::span<const int> pool, int k, Rng& rng);

/// Sorted complement of `subset` in {0, ..., n-1}.
std::vector<int> complement(std::span<const int> subset, int n);

/// Row indices grouped by label.
std::vector<std::vector<int>> rows_by_class(std::span<const int> labels, int n_classes);

}  // namespace robsel
