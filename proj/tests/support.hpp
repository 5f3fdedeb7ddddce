#pragma once

// Fixtures and independent oracles shared by the test binaries.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "robsel/common.hpp"
#include "robsel/model.hpp"

namespace testing {

using robsel::LabeledDataset;
using robsel::Rng;

inline Eigen::MatrixXd random_spd(int p, Rng& rng, double ridge = 0.2) {
    std::normal_distribution<double> z;
    Eigen::MatrixXd a(p, p + 2);
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) a(i, j) = z(rng);
    return a * a.transpose() / (p + 2) + ridge * Eigen::MatrixXd::Identity(p, p);
}

/// Gaussian classes with random means and covariances, `n` rows per class.
inline LabeledDataset gaussian_classes(int n, int p, int g, std::uint64_t seed, double separation = 3.0) {
    Rng rng(seed);
    std::normal_distribution<double> z;
    LabeledDataset d;
    d.x.resize(n * g, p);
    d.n_classes = g;
    for (int k = 0; k < g; ++k) {
        Eigen::VectorXd mu(p);
        for (int j = 0; j < p; ++j) mu[j] = separation * z(rng);
        const Eigen::MatrixXd l = random_spd(p, rng).llt().matrixL();
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd e(p);
            for (int j = 0; j < p; ++j) e[j] = z(rng);
            d.x.row(k * n + i) = (mu + l * e).transpose();
            d.labels.push_back(k);
        }
    }
    return d;
}

/// Plain-loop class mean and MLE covariance (denominator n_g) over `rows`.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> mean_cov(const Eigen::MatrixXd& x, const std::vector<int>& rows) {
    const int p = static_cast<int>(x.cols());
    Eigen::VectorXd m = Eigen::VectorXd::Zero(p);
    for (int r : rows) m += x.row(r).transpose();
    m /= static_cast<double>(rows.size());
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
    for (int r : rows) {
        const Eigen::VectorXd d = x.row(r).transpose() - m;
        s += d * d.transpose();
    }
    return {m, s / static_cast<double>(rows.size())};
}

inline std::vector<int> rows_of(const LabeledDataset& d, int g) {
    std::vector<int> out;
    for (int i = 0; i < d.rows(); ++i)
        if (d.labels[static_cast<std::size_t>(i)] == g) out.push_back(i);
    return out;
}

/// log N(x; mu, sigma) through the explicit inverse and determinant.
inline double logpdf_oracle(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
    const Eigen::VectorXd d = x - mu;
    const double q = d.dot(sigma.inverse() * d);
    return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + std::log(sigma.determinant()) + q);
}

/// Regularized lower incomplete gamma P(a, x) by its power series.
inline double gamma_p_series(double a, double x) {
    if (x <= 0.0) return 0.0;
    double term = 1.0 / a, sum = term;
    for (int n = 1; n < 100000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double chi_square_quantile_oracle(int df, double prob) {
    double lo = 0.0, hi = 1.0;
    while (gamma_p_series(0.5 * df, 0.5 * hi) < prob) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gamma_p_series(0.5 * df, 0.5 * mid) < prob ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Nelder-Mead minimization with restarts from the last optimum.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                                       double step = 0.5, int restarts = 30, int max_eval = 40000) {
    const std::size_t n = x0.size();
    double best = f(x0);
    for (int r = 0; r < restarts; ++r) {
        std::vector<std::vector<double>> s(n + 1, x0);
        for (std::size_t i = 0; i < n; ++i) s[i + 1][i] += step;
        std::vector<double> v(n + 1);
        for (std::size_t i = 0; i <= n; ++i) v[i] = f(s[i]);
        for (int e = 0; e < max_eval; ++e) {
            std::vector<std::size_t> idx(n + 1);
            for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
            std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
            std::vector<std::vector<double>> s2;
            std::vector<double> v2;
            for (auto i : idx) {
                s2.push_back(s[i]);
                v2.push_back(v[i]);
            }
            s = s2;
            v = v2;
            if (std::abs(v[n] - v[0]) < 1e-14 * (1.0 + std::abs(v[0]))) break;
            std::vector<double> c(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) c[j] += s[i][j] / n;
            auto along = [&](double t) {
                std::vector<double> p(n);
                for (std::size_t j = 0; j < n; ++j) p[j] = c[j] + t * (s[n][j] - c[j]);
                return p;
            };
            const auto xr = along(-1.0);
            const double fr = f(xr);
            if (fr < v[0]) {
                const auto xe = along(-2.0);
                const double fe = f(xe);
                if (fe < fr) {
                    s[n] = xe;
                    v[n] = fe;
                } else {
                    s[n] = xr;
                    v[n] = fr;
                }
            } else if (fr < v[n - 1]) {
                s[n] = xr;
                v[n] = fr;
            } else {
                const auto xc = fr < v[n] ? along(-0.5) : along(0.5);
                const double fc = f(xc);
                if (fc < std::min(fr, v[n])) {
                    s[n] = xc;
                    v[n] = fc;
                } else {
                    for (std::size_t i = 1; i <= n; ++i) {
                        for (std::size_t j = 0; j < n; ++j) s[i][j] = s[0][j] + 0.5 * (s[i][j] - s[0][j]);
                        v[i] = f(s[i]);
                    }
                }
            }
        }
        const auto it = std::min_element(v.begin(), v.end());
        const double improved = *it;
        x0 = s[static_cast<std::size_t>(it - v.begin())];
        if (best - improved < 1e-12) {
            best = std::min(best, improved);
            break;
        }
        best = improved;
        step *= 0.5;
    }
    return x0;
}

/// OLS with intercept by the normal equations. Returns (intercept, beta, rss).
struct OlsOracle {
    double intercept;
    Eigen::VectorXd beta;
    double rss;
};

inline OlsOracle ols_oracle(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const std::vector<int>& rows) {
    const int n = static_cast<int>(rows.size()), k = static_cast<int>(x.cols());
    Eigen::MatrixXd a(n, k + 1);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
        a(i, 0) = 1.0;
        a.row(i).tail(k) = x.row(rows[static_cast<std::size_t>(i)]);
        b[i] = y[rows[static_cast<std::size_t>(i)]];
    }
    const Eigen::VectorXd coef = (a.transpose() * a).ldlt().solve(a.transpose() * b);
    return {coef[0], coef.tail(k), (b - a * coef).squaredNorm()};
}

inline const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Untrimmed VVV classification log-likelihood (with log tau) on `cols`.
inline double classification_oracle(const LabeledDataset& d, const std::vector<int>& cols) {
    const Eigen::MatrixXd x = robsel::select_columns(d.x, cols);
    double ll = 0.0;
    for (int g = 0; g < d.n_classes; ++g) {
        const auto rows = rows_of(d, g);
        const auto [m, s] = mean_cov(x, rows);
        const double tau = static_cast<double>(rows.size()) / d.rows();
        for (int r : rows) ll += std::log(tau) + testing::logpdf_oracle(x.row(r).transpose(), m, s);
    }
    return ll;
}

inline int vvv_count(int dim, int g) { return (g - 1) + g * dim + g * dim * (dim + 1) / 2; }

inline double bic_grouping_oracle(const LabeledDataset& d, std::vector<int> included, int p_var) {
    included.push_back(p_var);
    const int n = d.rows();
    return 2.0 * classification_oracle(d, included) - vvv_count(static_cast<int>(included.size()), d.n_classes) * std::log(n);
}

inline double bic_nogrouping_oracle(const LabeledDataset& d, const std::vector<int>& included, int p_var,
                                    const std::vector<int>& regressors) {
    const int n = d.rows();
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    const auto ols = testing::ols_oracle(d.x.col(p_var), robsel::select_columns(d.x, regressors), all);
    const double s2 = ols.rss / n;
    const double reg = -0.5 * n * (kLog2Pi + std::log(s2) + 1.0);
    const double cls = classification_oracle(d, included);
    const int v = vvv_count(static_cast<int>(included.size()), d.n_classes) + static_cast<int>(regressors.size()) + 2;
    return 2.0 * (cls + reg) - v * std::log(n);
}

}  // namespace testing
