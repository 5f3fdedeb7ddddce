#include "robsel/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace robsel {

std::vector<int> OutlierScores::flagged(int k) const {
    if (k < 0) throw ValidationError("flag count must be nonnegative");
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(k), ranking.size());
    return {ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(n)};
}

OutlierScores outlier_score(const ClassParams& params, std::span<const int> columns, const Eigen::MatrixXd& test) {
    if (static_cast<int>(columns.size()) != params.dim()) {
        throw ValidationError("scoring needs " + std::to_string(params.dim()) + " columns, got " +
                              std::to_string(columns.size()));
    }
    for (int c : columns)
        if (c < 0 || c >= test.cols()) {
            throw ValidationError("test table has " + std::to_string(test.cols()) + " columns; column " +
                                  std::to_string(c + 1) + " is required");
        }
    const Eigen::MatrixXd y = select_columns(test, columns);
    const int G = params.n_classes();
    Eigen::MatrixXd lp(y.rows(), G);
    for (int g = 0; g < G; ++g) {
        const GaussianDensity d(params.mu[static_cast<std::size_t>(g)], params.sigma[static_cast<std::size_t>(g)]);
        lp.col(g) = d.log_density_rows(y).array() + std::log(params.tau[g]);
    }
    OutlierScores out;
    out.log_density.resize(static_cast<std::size_t>(y.rows()));
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const double m = lp.row(i).maxCoeff();
        out.log_density[static_cast<std::size_t>(i)] =
            std::isfinite(m) ? m + std::log((lp.row(i).array() - m).exp().sum()) : -std::numeric_limits<double>::infinity();
    }
    out.ranking.resize(out.log_density.size());
    std::iota(out.ranking.begin(), out.ranking.end(), 0);
    std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](int a, int b) {
        return out.log_density[static_cast<std::size_t>(a)] < out.log_density[static_cast<std::size_t>(b)];
    });
    return out;
}

OutlierScores outlier_score(const ReddaFit& fit, std::span<const int> columns, const Eigen::MatrixXd& test) {
    return outlier_score(fit.params, columns, test);
}

OutlierScores outlier_score(const MlSubsetFit& fit, const Eigen::MatrixXd& test) {
    if (test.cols() != fit.params.dim()) {
        throw ValidationError("test table has " + std::to_string(test.cols()) + " columns, the fit expects " +
                              std::to_string(fit.params.dim()));
    }
    const auto& F = fit.partition.relevant;
    ClassParams restricted;
    restricted.tau = fit.params.tau;
    for (int g = 0; g < fit.params.n_classes(); ++g) {
        const auto& mu = fit.params.mu[static_cast<std::size_t>(g)];
        const auto& sigma = fit.params.sigma[static_cast<std::size_t>(g)];
        Eigen::VectorXd m(static_cast<Eigen::Index>(F.size()));
        Eigen::MatrixXd s(m.size(), m.size());
        for (std::size_t a = 0; a < F.size(); ++a) {
            m[static_cast<Eigen::Index>(a)] = mu[F[a]];
            for (std::size_t b = 0; b < F.size(); ++b) s(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = sigma(F[a], F[b]);
        }
        restricted.mu.push_back(std::move(m));
        restricted.sigma.push_back(std::move(s));
    }
    return outlier_score(restricted, F, test);
}

}  // namespace robsel
