#include "robsel/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace robsel {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void LabeledDataset::validate() const {
    if (static_cast<Eigen::Index>(labels.size()) != x.rows()) {
        throw ValidationError("label vector length " + std::to_string(labels.size()) +
                              " does not match row count " + std::to_string(x.rows()));
    }
    if (n_classes < 1) throw ValidationError("dataset has no classes");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes) {
            throw ValidationError("label of row " + std::to_string(i + 1) + " out of range");
        }
    }
    if (!x.allFinite()) throw ValidationError("feature matrix contains non-finite values");
}

std::vector<int> LabeledDataset::class_counts() const {
    std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    return counts;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, std::span<const int> columns) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j] < 0 || columns[j] >= x.cols()) {
            throw ValidationError("column index " + std::to_string(columns[j]) + " out of range");
        }
        out.col(static_cast<Eigen::Index>(j)) = x.col(columns[j]);
    }
    return out;
}

LabeledDataset select_columns(const LabeledDataset& data, std::span<const int> columns) {
    LabeledDataset out;
    out.x = select_columns(data.x, columns);
    out.labels = data.labels;
    out.n_classes = data.n_classes;
    out.class_names = data.class_names;
    out.row_ids = data.row_ids;
    if (!data.feature_names.empty()) {
        for (int c : columns) out.feature_names.push_back(data.feature_names[static_cast<std::size_t>(c)]);
    }
    return out;
}

int trimmed_count(int n, double gamma) {
    if (gamma < 0.0 || gamma >= 1.0) throw ValidationError("trimming level must lie in [0, 1)");
    // Guard against 0.15 * 100 = 15.000000000000002 style representation noise.
    return static_cast<int>(std::floor(static_cast<double>(n) * gamma + 1e-9));
}

int kept_count(int n, double gamma) { return n - trimmed_count(n, gamma); }

TrimmingState TrimmingState::all(int n, double gamma) {
    TrimmingState t;
    t.keep.assign(static_cast<std::size_t>(n), 1);
    t.gamma = gamma;
    return t;
}

TrimmingState TrimmingState::from_kept(int n, std::span<const int> kept_rows, double gamma) {
    TrimmingState t;
    t.keep.assign(static_cast<std::size_t>(n), 0);
    for (int r : kept_rows) t.keep[static_cast<std::size_t>(r)] = 1;
    t.gamma = gamma;
    return t;
}

int TrimmingState::n_kept() const {
    return static_cast<int>(std::count(keep.begin(), keep.end(), std::uint8_t{1}));
}

std::vector<int> TrimmingState::discarded() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if (!kept(i)) out.push_back(i);
    return out;
}

std::vector<int> TrimmingState::kept_rows() const {
    std::vector<int> out;
    out.reserve(keep.size());
    for (int i = 0; i < size(); ++i)
        if (kept(i)) out.push_back(i);
    return out;
}

TrimmingState trim_lowest(std::span<const double> score, double gamma) {
    const int n = static_cast<int>(score.size());
    const int n_trim = trimmed_count(n, gamma);
    TrimmingState t = TrimmingState::all(n, gamma);
    if (n_trim == 0) return t;

    auto key = [&](int i) {
        const double s = score[static_cast<std::size_t>(i)];
        return std::isnan(s) ? -std::numeric_limits<double>::infinity() : s;
    };
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + n_trim, order.end(), [&](int a, int b) {
        const double ka = key(a), kb = key(b);
        return ka < kb || (ka == kb && a < b);
    });
    for (int i = 0; i < n_trim; ++i) t.keep[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 0;
    return t;
}

std::vector<int> sample_without_replacement(std::span<const int> pool, int k, Rng& rng) {
    std::vector<int> out;
    k = std::min<int>(k, static_cast<int>(pool.size()));
    out.reserve(static_cast<std::size_t>(k));
    std::sample(pool.begin(), pool.end(), std::back_inserter(out), k, rng);
    return out;
}

std::vector<int> complement(std::span<const int> subset, int n) {
    std::vector<std::uint8_t> in(static_cast<std::size_t>(n), 0);
    for (int s : subset) in[static_cast<std::size_t>(s)] = 1;
    std::vector<int> out;
    for (int i = 0; i < n; ++i)
        if (!in[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
}

std::vector<std::vector<int>> rows_by_class(std::span<const int> labels, int n_classes) {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
    return out;
}

}  // namespace robsel
