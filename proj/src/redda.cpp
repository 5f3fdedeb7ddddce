#include "robsel/redda.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "robsel/concentration.hpp"

namespace robsel {
namespace {

std::vector<GaussianDensity> class_densities(const ClassParams& params) {
    std::vector<GaussianDensity> out;
    out.reserve(static_cast<std::size_t>(params.n_classes()));
    for (int g = 0; g < params.n_classes(); ++g)
        out.emplace_back(params.mu[static_cast<std::size_t>(g)], params.sigma[static_cast<std::size_t>(g)]);
    return out;
}

void check_compatible(const ClassParams& params, const LabeledDataset& data) {
    if (params.dim() != data.cols()) {
        throw ValidationError("model dimension " + std::to_string(params.dim()) + " does not match data with " +
                              std::to_string(data.cols()) + " columns");
    }
    if (params.n_classes() != data.n_classes) throw ValidationError("model and data disagree on the number of classes");
}

}  // namespace

std::vector<double> own_class_log_density(const ClassParams& params, const LabeledDataset& data) {
    check_compatible(params, data);
    const auto densities = class_densities(params);
    const auto groups = rows_by_class(data.labels, data.n_classes);
    std::vector<double> out(static_cast<std::size_t>(data.rows()));
    for (int g = 0; g < data.n_classes; ++g) {
        const auto& rows = groups[static_cast<std::size_t>(g)];
        if (rows.empty()) continue;
        Eigen::MatrixXd block(static_cast<Eigen::Index>(rows.size()), data.cols());
        for (std::size_t k = 0; k < rows.size(); ++k) block.row(static_cast<Eigen::Index>(k)) = data.x.row(rows[k]);
        const Eigen::VectorXd ld = densities[static_cast<std::size_t>(g)].log_density_rows(block);
        for (std::size_t k = 0; k < rows.size(); ++k) out[static_cast<std::size_t>(rows[k])] = ld[static_cast<Eigen::Index>(k)];
    }
    return out;
}

double trimmed_loglik(const ClassParams& params, const LabeledDataset& data, const TrimmingState& keep) {
    if (keep.size() != data.rows()) throw ValidationError("trimming state length does not match data");
    if (keep.n_kept() == 0) return 0.0;
    const auto ld = own_class_log_density(params, data);
    double total = 0.0;
    for (int i = 0; i < data.rows(); ++i) {
        if (!keep.kept(i)) continue;
        total += std::log(params.tau[data.labels[static_cast<std::size_t>(i)]]) + ld[static_cast<std::size_t>(i)];
    }
    return total;
}

TrimmingState c_step(const ClassParams& params, const LabeledDataset& data, double gamma) {
    return trim_lowest(own_class_log_density(params, data), gamma);
}

TrimmingState random_class_subsets(std::span<const int> labels, int n_classes, int size, double gamma, Rng& rng) {
    const auto groups = rows_by_class(labels, n_classes);
    std::vector<int> kept;
    for (const auto& rows : groups) {
        const auto pick = sample_without_replacement(rows, size, rng);
        kept.insert(kept.end(), pick.begin(), pick.end());
    }
    return TrimmingState::from_kept(static_cast<int>(labels.size()), kept, gamma);
}

ReddaFit fit_redda_from(const LabeledDataset& data, const TrimmingState& initial, CovarianceModel model, double gamma,
                        int max_iter) {
    auto result = concentrate<ClassParams>(
        initial, gamma, max_iter, [&](const TrimmingState& keep) { return estimate_class_params(data, keep, model); },
        [&](const ClassParams& p) { return own_class_log_density(p, data); },
        [&](const ClassParams& p, const TrimmingState& keep) { return trimmed_loglik(p, data, keep); });
    ReddaFit fit;
    fit.params = std::move(result.state);
    fit.trimming = std::move(result.keep);
    fit.trimming.gamma = gamma;
    fit.model = model;
    fit.trimmed_loglik = result.objective;
    fit.n_iterations = result.iterations;
    fit.converged = result.converged;
    fit.stopped_on_decrease = result.stopped_on_decrease;
    fit.loglik_trace = std::move(result.trace);
    return fit;
}

ReddaFit fit_redda(const LabeledDataset& data, const ReddaOptions& options) {
    data.validate();
    if (options.gamma < 0.0 || options.gamma >= 0.5) throw ValidationError("trimming level must lie in [0, 0.5)");
    if (options.n_start < 1) throw ValidationError("n_start must be positive");
    if (options.max_iter < 1) throw ValidationError("max_iter must be positive");

    const int n_starts = options.gamma == 0.0 ? 1 : options.n_start;
    std::vector<std::optional<ReddaFit>> fits(static_cast<std::size_t>(n_starts));
    std::vector<std::string> errors(static_cast<std::size_t>(n_starts));
    parallel_for(n_starts, options.threads, [&](int s) {
        try {
            TrimmingState init;
            if (options.gamma == 0.0) {
                init = TrimmingState::all(data.rows(), 0.0);
            } else {
                Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(s)));
                init = random_class_subsets(data.labels, data.n_classes, data.cols() + 1, options.gamma, rng);
            }
            fits[static_cast<std::size_t>(s)] = fit_redda_from(data, init, options.model, options.gamma, options.max_iter);
        } catch (const EstimationError& e) {
            errors[static_cast<std::size_t>(s)] = e.what();
        }
    });

    int best = -1, failed = 0;
    for (int s = 0; s < n_starts; ++s) {
        const auto& f = fits[static_cast<std::size_t>(s)];
        if (!f) {
            ++failed;
            continue;
        }
        if (best < 0 || f->trimmed_loglik > fits[static_cast<std::size_t>(best)]->trimmed_loglik) best = s;
    }
    if (best < 0) throw EstimationError("all " + std::to_string(n_starts) + " starts failed: " + errors.front());
    ReddaFit out = std::move(*fits[static_cast<std::size_t>(best)]);
    out.best_start = best;
    out.failed_starts = failed;
    return out;
}

Prediction predict_map(const ClassParams& params, const Eigen::MatrixXd& test) {
    if (test.cols() != params.dim()) {
        throw ValidationError("test data has " + std::to_string(test.cols()) + " columns, model expects " +
                              std::to_string(params.dim()));
    }
    const int G = params.n_classes();
    Eigen::MatrixXd logp(test.rows(), G);
    for (int g = 0; g < G; ++g) {
        const GaussianDensity dens(params.mu[static_cast<std::size_t>(g)], params.sigma[static_cast<std::size_t>(g)]);
        logp.col(g) = dens.log_density_rows(test).array() + std::log(params.tau[g]);
    }
    Prediction out;
    out.posterior.resize(test.rows(), G);
    out.labels.resize(static_cast<std::size_t>(test.rows()));
    for (Eigen::Index m = 0; m < test.rows(); ++m) {
        Eigen::Index arg = 0;
        for (Eigen::Index g = 1; g < G; ++g)
            if (logp(m, g) > logp(m, arg)) arg = g;
        const double top = logp(m, arg);
        const Eigen::ArrayXd w = (logp.row(m).array() - top).exp();
        out.posterior.row(m) = w / w.sum();
        out.labels[static_cast<std::size_t>(m)] = static_cast<int>(arg);
    }
    return out;
}

Prediction predict_map(const ReddaFit& fit, const Eigen::MatrixXd& test) { return predict_map(fit.params, test); }

std::vector<TrimmedAssignment> reassign_trimmed(const ReddaFit& fit, const LabeledDataset& data) {
    const std::vector<int> rows = fit.trimming.discarded();
    std::vector<TrimmedAssignment> out;
    if (rows.empty()) return out;
    Eigen::MatrixXd block(static_cast<Eigen::Index>(rows.size()), data.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) block.row(static_cast<Eigen::Index>(k)) = data.x.row(rows[k]);
    const Prediction pred = predict_map(fit.params, block);
    for (std::size_t k = 0; k < rows.size(); ++k) out.push_back({rows[k], pred.labels[k]});
    return out;
}

}  // namespace robsel
