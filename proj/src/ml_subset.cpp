#include "robsel/ml_subset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "robsel/concentration.hpp"
#include "robsel/redda.hpp"

namespace robsel {
namespace {

constexpr std::int64_t kExhaustiveLimit = 20000;

Eigen::MatrixXd restrict(const Eigen::MatrixXd& m, std::span<const int> rows, std::span<const int> cols) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
    return out;
}

Eigen::VectorXd restrict(const Eigen::VectorXd& v, std::span<const int> idx) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
    return out;
}

void require_pooled(const ClassParams& params) {
    if (!params.pooled_mu || !params.pooled_sigma) throw ValidationError("class parameters lack pooled estimates");
}

// Calls fn(subset) for every k-subset of {0..n-1} in lexicographic order.
template <class Fn>
void for_each_combination(int n, int k, Fn&& fn) {
    std::vector<int> idx(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        fn(std::span<const int>(idx));
        int i = k - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
        if (i < 0) return;
        ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
}

struct MlState {
    ClassParams params;
    SubsetPartition partition;
    ConditionalLink link;
};

}  // namespace

SubsetPartition SubsetPartition::from_relevant(std::vector<int> relevant, int n_vars) {
    std::sort(relevant.begin(), relevant.end());
    if (std::adjacent_find(relevant.begin(), relevant.end()) != relevant.end()) throw ValidationError("duplicate relevant variable");
    for (int v : relevant)
        if (v < 0 || v >= n_vars) throw ValidationError("relevant variable out of range");
    SubsetPartition out;
    out.irrelevant = complement(relevant, n_vars);
    out.relevant = std::move(relevant);
    return out;
}

std::string_view to_string(SubsetSearch s) {
    switch (s) {
        case SubsetSearch::Auto: return "auto";
        case SubsetSearch::Exhaustive: return "exhaustive";
        case SubsetSearch::Genetic: return "genetic";
        case SubsetSearch::ClosedForm: return "closed-form";
    }
    return "?";
}

SubsetSearch parse_subset_search(std::string_view s) {
    for (auto v : {SubsetSearch::Auto, SubsetSearch::Exhaustive, SubsetSearch::Genetic, SubsetSearch::ClosedForm})
        if (to_string(v) == s) return v;
    throw ValidationError("unknown subset search '" + std::string(s) + "'");
}

std::int64_t n_choose_k(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    long double r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
        if (r > static_cast<long double>(std::numeric_limits<std::int64_t>::max())) return std::numeric_limits<std::int64_t>::max();
    }
    return static_cast<std::int64_t>(std::llround(r));
}

std::vector<double> joint_row_loglik(const LabeledDataset& data, const SubsetPartition& partition,
                                     const ClassParams& params, const ConditionalLink& link) {
    const auto& F = partition.relevant;
    const auto& E = partition.irrelevant;
    if (params.dim() != data.cols()) throw ValidationError("class parameters do not match the data dimension");
    if (link.coef.rows() != static_cast<Eigen::Index>(E.size()) || link.coef.cols() != static_cast<Eigen::Index>(F.size())) {
        throw ValidationError("conditional link does not match the partition");
    }

    ClassParams restricted;
    restricted.tau = params.tau;
    for (int g = 0; g < params.n_classes(); ++g) {
        restricted.mu.push_back(restrict(params.mu[static_cast<std::size_t>(g)], F));
        restricted.sigma.push_back(restrict(params.sigma[static_cast<std::size_t>(g)], F, F));
    }
    const LabeledDataset on_f = select_columns(data, F);
    std::vector<double> out = own_class_log_density(restricted, on_f);
    for (int i = 0; i < data.rows(); ++i) out[static_cast<std::size_t>(i)] += std::log(params.tau[data.labels[static_cast<std::size_t>(i)]]);

    if (!E.empty()) {
        const Eigen::MatrixXd xe = select_columns(data.x, E);
        const Eigen::MatrixXd residual = xe - on_f.x * link.coef.transpose();
        const GaussianDensity cond(link.mean, link.covariance);
        const Eigen::VectorXd ld = cond.log_density_rows(residual);
        for (int i = 0; i < data.rows(); ++i) out[static_cast<std::size_t>(i)] += ld[i];
    }
    return out;
}

double joint_trimmed_loglik(const LabeledDataset& data, const SubsetPartition& partition, const ClassParams& params,
                            const ConditionalLink& link, const TrimmingState& keep) {
    if (keep.size() != data.rows()) throw ValidationError("trimming state length does not match data");
    if (keep.n_kept() == 0) return 0.0;
    const auto rows = joint_row_loglik(data, partition, params, link);
    double total = 0.0;
    for (int i = 0; i < keep.size(); ++i)
        if (keep.kept(i)) total += rows[static_cast<std::size_t>(i)];
    return total;
}

SubsetInit robust_init(const LabeledDataset& data, int p, double gamma, std::uint64_t seed, CovarianceModel model) {
    const int N = data.rows(), P = data.cols(), G = data.n_classes;
    if (p < 1 || p > P) throw ValidationError("subset size p must lie in [1, P]");
    const auto counts = data.class_counts();
    const int smallest = *std::min_element(counts.begin(), counts.end());
    Rng rng(seed);
    SubsetInit out;
    if (N > 2 * G * (P + 1) && smallest >= P + 1) {
        out.large_sample = true;
        out.keep = random_class_subsets(data.labels, G, P + 1, gamma, rng);
        return out;
    }
    if (smallest < p + 1) {
        throw EstimationError("a class has fewer than p + 1 = " + std::to_string(p + 1) + " rows; cannot initialize");
    }
    const TrimmingState subsets = random_class_subsets(data.labels, G, p + 1, gamma, rng);
    std::vector<int> all(static_cast<std::size_t>(P));
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> f0 = sample_without_replacement(all, p, rng);
    std::sort(f0.begin(), f0.end());
    const LabeledDataset on_f = select_columns(data, f0);
    const ClassParams restricted = estimate_class_params(on_f, subsets, model);
    out.keep = trim_lowest(own_class_log_density(restricted, on_f), gamma);
    out.relevant = std::move(f0);
    return out;
}

ClassParams m_step(const LabeledDataset& data, const TrimmingState& keep, CovarianceModel model) {
    ClassParams params = estimate_class_params(data, keep, model);
    params.pooled_mu = pooled_mean(data.x, keep);
    params.pooled_sigma = pooled_covariance(data.x, keep, model);
    return params;
}

double h_objective(const ClassParams& params, std::span<const int> relevant, bool* floored) {
    require_pooled(params);
    bool any = false, f = false;
    double h = 0.0;
    for (int g = 0; g < params.n_classes(); ++g) {
        h += params.tau[g] * log_det(restrict(params.sigma[static_cast<std::size_t>(g)], relevant, relevant), &f);
        any = any || f;
    }
    h -= log_det(restrict(*params.pooled_sigma, relevant, relevant), &f);
    any = any || f;
    if (floored) *floored = any;
    return h;
}

Eigen::VectorXd diagonal_relevance_scores(const ClassParams& params) {
    require_pooled(params);
    const Eigen::VectorXd pooled = params.pooled_sigma->diagonal();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(params.dim());
    for (int g = 0; g < params.n_classes(); ++g)
        out += params.tau[g] * (params.sigma[static_cast<std::size_t>(g)].diagonal().array() / pooled.array()).log().matrix();
    return out;
}

SStepResult s_step(const ClassParams& params, int p, CovarianceModel model, SubsetSearch search, const GaOptions& ga,
                   std::uint64_t seed, const std::vector<int>& current) {
    require_pooled(params);
    const int P = params.dim();
    if (p < 1 || p > P) throw ValidationError("subset size p must lie in [1, P]");
    const bool diagonal_closed_form = model == CovarianceModel::VVI || model == CovarianceModel::EEI;
    if (search == SubsetSearch::ClosedForm && !diagonal_closed_form) {
        throw ValidationError("closed-form S-step is only available for VVI and EEI");
    }
    if (search == SubsetSearch::Auto) {
        search = diagonal_closed_form                 ? SubsetSearch::ClosedForm
                 : n_choose_k(P, p) <= kExhaustiveLimit ? SubsetSearch::Exhaustive
                                                        : SubsetSearch::Genetic;
    }
    SStepResult out;
    out.method = search;
    if (p == P) {
        out.relevant.resize(static_cast<std::size_t>(P));
        std::iota(out.relevant.begin(), out.relevant.end(), 0);
        out.value = h_objective(params, out.relevant);
        return out;
    }
    switch (search) {
        case SubsetSearch::ClosedForm: {
            const Eigen::VectorXd score = diagonal_relevance_scores(params);
            std::vector<int> order(static_cast<std::size_t>(P));
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return score[a] < score[b]; });
            out.relevant.assign(order.begin(), order.begin() + p);
            std::sort(out.relevant.begin(), out.relevant.end());
            out.value = 0.0;
            for (int k : out.relevant) out.value += score[k];
            break;
        }
        case SubsetSearch::Exhaustive: {
            out.value = std::numeric_limits<double>::infinity();
            for_each_combination(P, p, [&](std::span<const int> f) {
                const double v = h_objective(params, f);
                if (v < out.value) {
                    out.value = v;
                    out.relevant.assign(f.begin(), f.end());
                }
            });
            break;
        }
        case SubsetSearch::Genetic:
        case SubsetSearch::Auto: {
            std::vector<std::vector<int>> seeds;
            if (static_cast<int>(current.size()) == p) seeds.push_back(current);
            const GaResult r = minimize_subset(P, p, [&](std::span<const int> f) { return h_objective(params, f); }, ga,
                                               seed, seeds);
            out.relevant = r.best;
            out.value = r.value;
            break;
        }
    }
    return out;
}

ConditionalLink conditional_link(const ClassParams& params, const SubsetPartition& partition) {
    require_pooled(params);
    const auto& F = partition.relevant;
    const auto& E = partition.irrelevant;
    const Eigen::MatrixXd& S = *params.pooled_sigma;
    const Eigen::VectorXd& m = *params.pooled_mu;
    ConditionalLink link;
    if (E.empty()) {
        link.coef.resize(0, static_cast<Eigen::Index>(F.size()));
        link.mean.resize(0);
        link.covariance.resize(0, 0);
        return link;
    }
    Eigen::MatrixXd s_f = restrict(S, F, F);
    const Eigen::MatrixXd s_ef = restrict(S, E, F);
    const Eigen::MatrixXd s_e = restrict(S, E, E);
    Eigen::LLT<Eigen::MatrixXd> llt(s_f);
    if (llt.info() != Eigen::Success) {
        s_f = regularize_covariance(s_f);
        llt.compute(s_f);
        if (llt.info() != Eigen::Success) throw EstimationError("pooled covariance restricted to F is singular");
    }
    link.coef = llt.solve(s_ef.transpose()).transpose();
    link.mean = restrict(m, E) - link.coef * restrict(m, F);
    Eigen::MatrixXd cov = s_e - link.coef * s_ef.transpose();
    link.covariance = 0.5 * (cov + cov.transpose());
    return link;
}

TStepResult t_step(const LabeledDataset& data, const ClassParams& params, std::span<const int> relevant, double gamma) {
    const SubsetPartition partition = SubsetPartition::from_relevant({relevant.begin(), relevant.end()}, data.cols());
    TStepResult out;
    out.link = conditional_link(params, partition);
    out.keep = trim_lowest(joint_row_loglik(data, partition, params, out.link), gamma);
    return out;
}

MlSubsetFit fit_ml_subset(const LabeledDataset& data, int p, const MlSubsetOptions& options) {
    data.validate();
    if (p < 1 || p > data.cols()) throw ValidationError("subset size p must lie in [1, P]");
    if (options.gamma < 0.0 || options.gamma >= 0.5) throw ValidationError("trimming level must lie in [0, 0.5)");
    if (options.n_init < 1 || options.max_iter < 1) throw ValidationError("n_init and max_iter must be positive");

    std::vector<std::optional<MlSubsetFit>> fits(static_cast<std::size_t>(options.n_init));
    std::vector<std::string> errors(static_cast<std::size_t>(options.n_init));
    parallel_for(options.n_init, options.threads, [&](int r) {
        const std::uint64_t seed = derive_seed(options.seed, static_cast<std::uint64_t>(r));
        try {
            const SubsetInit init = robust_init(data, p, options.gamma, seed, options.model);
            std::vector<int> previous = init.relevant.value_or(std::vector<int>{});
            std::uint64_t step = 0;
            auto run = concentrate<MlState>(
                init.keep, options.gamma, options.max_iter,
                [&](const TrimmingState& keep) {
                    MlState st;
                    st.params = m_step(data, keep, options.model);
                    const SStepResult s = s_step(st.params, p, options.model, options.search, options.ga,
                                                 derive_seed(seed, ++step), previous);
                    previous = s.relevant;
                    st.partition = SubsetPartition::from_relevant(s.relevant, data.cols());
                    st.link = conditional_link(st.params, st.partition);
                    return st;
                },
                [&](const MlState& st) { return joint_row_loglik(data, st.partition, st.params, st.link); },
                [&](const MlState& st, const TrimmingState& keep) {
                    return joint_trimmed_loglik(data, st.partition, st.params, st.link, keep);
                });
            MlSubsetFit fit;
            fit.partition = std::move(run.state.partition);
            fit.params = std::move(run.state.params);
            fit.link = std::move(run.state.link);
            fit.trimming = std::move(run.keep);
            fit.trimming.gamma = options.gamma;
            fit.objective = run.objective;
            fit.iterations = run.iterations;
            fit.converged = run.converged;
            fit.stopped_on_decrease = run.stopped_on_decrease;
            fit.objective_trace = std::move(run.trace);
            fits[static_cast<std::size_t>(r)] = std::move(fit);
        } catch (const EstimationError& e) {
            errors[static_cast<std::size_t>(r)] = e.what();
        }
    });

    int best = -1, failed = 0;
    for (int r = 0; r < options.n_init; ++r) {
        const auto& f = fits[static_cast<std::size_t>(r)];
        if (!f) {
            ++failed;
            continue;
        }
        if (best < 0 || f->objective > fits[static_cast<std::size_t>(best)]->objective) best = r;
    }
    if (best < 0) {
        std::string first;
        for (const auto& e : errors)
            if (!e.empty()) {
                first = e;
                break;
            }
        throw EstimationError("all " + std::to_string(options.n_init) + " initializations failed: " + first);
    }
    MlSubsetFit out = std::move(*fits[static_cast<std::size_t>(best)]);
    out.n_init_used = options.n_init;
    out.best_init = best;
    out.failed_inits = failed;
    return out;
}

}  // namespace robsel
