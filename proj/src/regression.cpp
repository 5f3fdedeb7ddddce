#include "robsel/regression.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "robsel/concentration.hpp"

namespace robsel {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr int kExhaustiveLimit = 10;

// Centered cross-products of the kept rows, used to score many candidate subsets quickly.
struct KeptMoments {
    Eigen::MatrixXd xx;  // k x k
    Eigen::VectorXd xy;  // k
    double yy = 0.0;
    int n = 0;
};

KeptMoments kept_moments(int response, std::span<const int> cols, const Eigen::MatrixXd& x, const TrimmingState& keep) {
    const auto rows = keep.kept_rows();
    const auto k = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd z(static_cast<Eigen::Index>(rows.size()), k);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (Eigen::Index j = 0; j < k; ++j) z(static_cast<Eigen::Index>(i), j) = x(rows[i], cols[static_cast<std::size_t>(j)]);
        y[static_cast<Eigen::Index>(i)] = x(rows[i], response);
    }
    z.rowwise() -= z.colwise().mean();
    y.array() -= y.mean();
    return {z.transpose() * z, z.transpose() * y, y.squaredNorm(), static_cast<int>(rows.size())};
}

// BIC of the subset given by positions `pos` into the moment matrices; -inf when collinear.
double subset_bic(const KeptMoments& m, std::span<const int> pos) {
    const auto k = static_cast<Eigen::Index>(pos.size());
    double rss = m.yy;
    if (k > 0) {
        Eigen::MatrixXd a(k, k);
        Eigen::VectorXd b(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            b[i] = m.xy[pos[static_cast<std::size_t>(i)]];
            for (Eigen::Index j = 0; j < k; ++j) a(i, j) = m.xx(pos[static_cast<std::size_t>(i)], pos[static_cast<std::size_t>(j)]);
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
        if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, a.diagonal().maxCoeff())) {
            return -std::numeric_limits<double>::infinity();
        }
        rss -= b.dot(ldlt.solve(b));
    }
    const double floor = 1e-12 * std::max(m.yy, 1e-300);
    rss = std::max(rss, floor);
    const double n = m.n;
    return -n * (std::log(rss / n) + kLog2Pi + 1.0) - (static_cast<double>(k) + 2.0) * std::log(n);
}

}  // namespace

double RegressionParams::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    return intercept + (beta.size() ? row.dot(beta.transpose()) : 0.0);
}

Eigen::VectorXd RegressionParams::log_density(const Eigen::VectorXd& y, const Eigen::MatrixXd& design) const {
    Eigen::VectorXd fitted = Eigen::VectorXd::Constant(y.size(), intercept);
    if (beta.size()) fitted += design * beta;
    const Eigen::ArrayXd r = (y - fitted).array();
    return (-0.5 * (kLog2Pi + std::log(sigma2) + r.square() / sigma2)).matrix();
}

RegressionParams ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, const TrimmingState& keep) {
    if (design.rows() != y.size() || keep.size() != y.size()) throw ValidationError("regression inputs have inconsistent lengths");
    const auto rows = keep.kept_rows();
    const auto n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index k = design.cols();
    if (n < 2) throw EstimationError("regression needs at least two kept rows");

    Eigen::MatrixXd z(n, k);
    Eigen::VectorXd t(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        z.row(i) = design.row(rows[static_cast<std::size_t>(i)]);
        t[i] = y[rows[static_cast<std::size_t>(i)]];
    }
    const Eigen::RowVectorXd z_mean = z.colwise().mean();
    const double t_mean = t.mean();
    z.rowwise() -= z_mean;
    t.array() -= t_mean;

    RegressionParams out;
    out.beta = Eigen::VectorXd::Zero(k);
    if (k > 0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
        qr.setThreshold(1e-10);
        const Eigen::Index rank = qr.rank();
        if (rank == k) {
            out.beta = qr.solve(t);
        } else {
            std::vector<int> keep_cols;
            for (Eigen::Index j = 0; j < rank; ++j) keep_cols.push_back(static_cast<int>(qr.colsPermutation().indices()[j]));
            std::sort(keep_cols.begin(), keep_cols.end());
            out.dropped = complement(keep_cols, static_cast<int>(k));
            if (!keep_cols.empty()) {
                const Eigen::MatrixXd zr = select_columns(z, keep_cols);
                const Eigen::VectorXd br = zr.colPivHouseholderQr().solve(t);
                for (std::size_t j = 0; j < keep_cols.size(); ++j) out.beta[keep_cols[j]] = br[static_cast<Eigen::Index>(j)];
            }
        }
    }
    out.intercept = t_mean - z_mean.dot(out.beta.transpose());
    const double rss = (t - z * out.beta).squaredNorm();
    const double var_t = t.squaredNorm() / static_cast<double>(n);
    out.sigma2 = std::max(rss / static_cast<double>(n), std::max(1e-10 * var_t, 1e-12));
    return out;
}

TrimmedRegression trimmed_regression(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, double gamma,
                                     const TrimmingState& keep_init, int max_iter) {
    if (gamma < 0.0 || gamma >= 0.5) throw ValidationError("trimming level must lie in [0, 0.5)");
    if (keep_init.size() != y.size()) throw ValidationError("initial trimming state length does not match data");
    if (kept_count(static_cast<int>(y.size()), gamma) <= design.cols() + 1) {
        throw ValidationError("too few kept rows for the number of regressors");
    }
    auto residual_scores = [&](const RegressionParams& p) {
        std::vector<double> s(static_cast<std::size_t>(y.size()));
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double r = y[i] - p.predict(design.row(i));
            s[static_cast<std::size_t>(i)] = -r * r;
        }
        return s;
    };
    auto result = concentrate<RegressionParams>(
        keep_init, gamma, max_iter, [&](const TrimmingState& keep) { return ols_fit(y, design, keep); }, residual_scores,
        [&](const RegressionParams& p, const TrimmingState& keep) {
            const auto s = residual_scores(p);
            double rss = 0.0;
            for (int i = 0; i < keep.size(); ++i)
                if (keep.kept(i)) rss -= s[static_cast<std::size_t>(i)];
            return -rss;
        });
    TrimmedRegression out;
    out.params = std::move(result.state);
    out.keep = std::move(result.keep);
    out.keep.gamma = gamma;
    out.trimmed_rss = -result.objective;
    out.iterations = result.iterations;
    out.converged = result.converged;
    return out;
}

double regression_bic(int response, std::span<const int> regressors, const Eigen::MatrixXd& x, const TrimmingState& keep) {
    const KeptMoments m = kept_moments(response, regressors, x, keep);
    std::vector<int> pos(regressors.size());
    for (std::size_t j = 0; j < pos.size(); ++j) pos[j] = static_cast<int>(j);
    return subset_bic(m, pos);
}

std::vector<int> select_regressors(int response, std::span<const int> included, const Eigen::MatrixXd& x,
                                   const TrimmingState& keep) {
    if (included.empty()) return {};
    const KeptMoments m = kept_moments(response, included, x, keep);
    const int k = static_cast<int>(included.size());
    std::vector<int> best_pos;

    if (k <= kExhaustiveLimit) {
        double best = subset_bic(m, {});
        int best_size = 0;
        std::vector<int> pos;
        for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
            pos.clear();
            for (int j = 0; j < k; ++j)
                if (mask & (1u << j)) pos.push_back(j);
            const double bic = subset_bic(m, pos);
            const int size = std::popcount(mask);
            if (bic > best || (bic == best && size < best_size)) {
                best = bic;
                best_size = size;
                best_pos = pos;
            }
        }
    } else {
        double current = subset_bic(m, {});
        std::vector<int> remaining(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) remaining[static_cast<std::size_t>(j)] = j;
        while (!remaining.empty()) {
            double step_best = -std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t c = 0; c < remaining.size(); ++c) {
                auto trial = best_pos;
                trial.push_back(remaining[c]);
                const double bic = subset_bic(m, trial);
                if (bic > step_best) {
                    step_best = bic;
                    arg = c;
                }
            }
            if (!(step_best > current)) break;
            current = step_best;
            best_pos.push_back(remaining[arg]);
            remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(arg));
        }
        std::sort(best_pos.begin(), best_pos.end());
    }
    std::vector<int> out;
    for (int p : best_pos) out.push_back(included[static_cast<std::size_t>(p)]);
    return out;
}

}  // namespace robsel
