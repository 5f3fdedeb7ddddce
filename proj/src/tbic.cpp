#include "robsel/tbic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "robsel/concentration.hpp"
#include "robsel/redda.hpp"

namespace robsel {
namespace {

enum class ModelKind : std::uint64_t { Grouping = 1, NoGrouping = 2 };

std::uint64_t evaluation_seed(std::uint64_t master, std::span<const int> included, int p_var, ModelKind kind) {
    std::vector<int> sorted(included.begin(), included.end());
    std::sort(sorted.begin(), sorted.end());
    std::uint64_t h = derive_seed(master, static_cast<std::uint64_t>(kind));
    h = derive_seed(h, static_cast<std::uint64_t>(p_var));
    for (int c : sorted) h = derive_seed(h, static_cast<std::uint64_t>(c) + 1000003ULL);
    return h;
}

void check_selection_args(const LabeledDataset& data, std::span<const int> included, int p_var) {
    if (p_var < 0 || p_var >= data.cols()) throw ValidationError("proposed variable out of range");
    for (int c : included) {
        if (c < 0 || c >= data.cols()) throw ValidationError("included variable out of range");
        if (c == p_var) throw ValidationError("proposed variable is already included");
    }
}

std::vector<int> with_proposal(std::span<const int> included, int p_var) {
    std::vector<int> cols(included.begin(), included.end());
    cols.push_back(p_var);
    return cols;
}

double label_loglik(std::span<const int> labels, int n_classes, const TrimmingState& keep, Eigen::VectorXd* tau_out) {
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_classes);
    for (int i = 0; i < keep.size(); ++i)
        if (keep.kept(i)) counts[labels[static_cast<std::size_t>(i)]] += 1.0;
    const double n = counts.sum();
    double ll = 0.0;
    for (int g = 0; g < n_classes; ++g)
        if (counts[g] > 0) ll += counts[g] * std::log(counts[g] / n);
    if (tau_out) *tau_out = counts / n;
    return ll;
}

// Parameters of the No-Grouping model for a fixed kept set.
struct NoGroupingState {
    std::optional<ClassParams> classifier;  // empty when nothing is included
    RegressionParams regression;
};

struct NoGroupingProblem {
    const LabeledDataset& data;
    LabeledDataset included_data;
    std::vector<int> included;
    int p_var;
    CovarianceModel model;
    Eigen::VectorXd y;

    NoGroupingProblem(const LabeledDataset& d, std::span<const int> inc, int p, CovarianceModel m)
        : data(d), included_data(select_columns(d, inc)), included(inc.begin(), inc.end()), p_var(p), model(m),
          y(d.x.col(p)) {}

    NoGroupingState estimate(const TrimmingState& keep) const {
        NoGroupingState s;
        if (!included.empty()) {
            s.classifier = estimate_class_params(included_data, keep, model);
        } else {
            for (int c : data.class_counts())
                if (c == 0) throw EstimationError("empty class");
        }
        const std::vector<int> r = select_regressors(p_var, included, data.x, keep);
        s.regression = ols_fit(y, select_columns(data.x, r), keep);
        s.regression.regressors = r;
        return s;
    }

    Eigen::VectorXd regression_density(const NoGroupingState& s) const {
        return s.regression.log_density(y, select_columns(data.x, s.regression.regressors));
    }

    std::vector<double> criterion(const NoGroupingState& s) const {
        std::vector<double> out(static_cast<std::size_t>(data.rows()), 0.0);
        if (s.classifier) out = own_class_log_density(*s.classifier, included_data);
        const Eigen::VectorXd reg = regression_density(s);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += reg[static_cast<Eigen::Index>(i)];
        return out;
    }

    std::pair<double, double> logliks(const NoGroupingState& s, const TrimmingState& keep) const {
        const double cls = s.classifier ? trimmed_loglik(*s.classifier, included_data, keep)
                                        : label_loglik(data.labels, data.n_classes, keep, nullptr);
        const Eigen::VectorXd reg = regression_density(s);
        double r = 0.0;
        for (int i = 0; i < keep.size(); ++i)
            if (keep.kept(i)) r += reg[i];
        return {cls, r};
    }

    TbicScore score(const NoGroupingState& s, const TrimmingState& keep) const {
        TbicScore out;
        const auto [cls, reg] = logliks(s, keep);
        out.classification_loglik = cls;
        out.regression_loglik = reg;
        const int v_c = included.empty() ? data.n_classes - 1
                                         : parameter_count(model, static_cast<int>(included.size()), data.n_classes);
        const int v_p = static_cast<int>(s.regression.regressors.size()) + 2;
        out.n_params = v_c + v_p;
        out.n_kept = keep.n_kept();
        out.score = 2.0 * (cls + reg) - out.n_params * std::log(static_cast<double>(out.n_kept));
        out.trimming = keep;
        out.regressors = s.regression.regressors;
        return out;
    }
};

}  // namespace

std::string_view to_string(StepKind kind) { return kind == StepKind::Add ? "add" : "remove"; }

TbicScore grouping_score_at(const LabeledDataset& data, std::span<const int> included, int p_var,
                            const TrimmingState& keep, CovarianceModel model) {
    check_selection_args(data, included, p_var);
    const LabeledDataset sub = select_columns(data, with_proposal(included, p_var));
    const ClassParams params = estimate_class_params(sub, keep, model);
    TbicScore out;
    out.classification_loglik = trimmed_loglik(params, sub, keep);
    out.n_params = parameter_count(model, sub.cols(), data.n_classes);
    out.n_kept = keep.n_kept();
    out.score = 2.0 * out.classification_loglik - out.n_params * std::log(static_cast<double>(out.n_kept));
    out.trimming = keep;
    out.converged = true;
    return out;
}

TbicScore tbic_grouping(const LabeledDataset& data, std::span<const int> included, int p_var, const TbicOptions& options) {
    check_selection_args(data, included, p_var);
    const LabeledDataset sub = select_columns(data, with_proposal(included, p_var));
    ReddaOptions ro;
    ro.model = options.model;
    ro.gamma = options.gamma;
    ro.n_start = options.n_start;
    ro.max_iter = options.max_iter;
    ro.seed = evaluation_seed(options.seed, included, p_var, ModelKind::Grouping);
    const ReddaFit fit = fit_redda(sub, ro);
    TbicScore out;
    out.classification_loglik = fit.trimmed_loglik;
    out.n_params = parameter_count(options.model, sub.cols(), data.n_classes);
    out.n_kept = fit.trimming.n_kept();
    out.score = 2.0 * fit.trimmed_loglik - out.n_params * std::log(static_cast<double>(out.n_kept));
    out.trimming = fit.trimming;
    out.converged = fit.converged;
    return out;
}

TbicScore nogrouping_score_at(const LabeledDataset& data, std::span<const int> included, int p_var,
                              const TrimmingState& keep, CovarianceModel model) {
    check_selection_args(data, included, p_var);
    const NoGroupingProblem problem(data, included, p_var, model);
    TbicScore out = problem.score(problem.estimate(keep), keep);
    out.converged = true;
    return out;
}

TbicScore tbic_nogrouping(const LabeledDataset& data, std::span<const int> included, int p_var,
                          const TbicOptions& options) {
    check_selection_args(data, included, p_var);
    if (options.gamma < 0.0 || options.gamma >= 0.5) throw ValidationError("trimming level must lie in [0, 0.5)");
    const NoGroupingProblem problem(data, included, p_var, options.model);
    const std::uint64_t seed = evaluation_seed(options.seed, included, p_var, ModelKind::NoGrouping);
    const int n_starts = options.gamma == 0.0 ? 1 : options.n_start;
    const int subset_size = static_cast<int>(included.size()) + 2;

    std::optional<ConcentrationResult<NoGroupingState>> best;
    std::string last_error;
    for (int s = 0; s < n_starts; ++s) {
        TrimmingState init;
        if (options.gamma == 0.0) {
            init = TrimmingState::all(data.rows(), 0.0);
        } else {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
            init = random_class_subsets(data.labels, data.n_classes, subset_size, options.gamma, rng);
        }
        try {
            auto run = concentrate<NoGroupingState>(
                init, options.gamma, options.max_iter,
                [&](const TrimmingState& keep) { return problem.estimate(keep); },
                [&](const NoGroupingState& st) { return problem.criterion(st); },
                [&](const NoGroupingState& st, const TrimmingState& keep) {
                    const auto [c, r] = problem.logliks(st, keep);
                    return c + r;
                });
            if (!best || run.objective > best->objective) best = std::move(run);
        } catch (const EstimationError& e) {
            last_error = e.what();
        }
    }
    if (!best) throw EstimationError("all No-Grouping starts failed: " + last_error);
    best->keep.gamma = options.gamma;
    TbicScore out = problem.score(best->state, best->keep);
    out.converged = best->converged;
    return out;
}

SelectionResult greedy_select(const LabeledDataset& data, const TbicOptions& options) {
    data.validate();
    const int P = data.cols();
    const int expected_kept = kept_count(data.rows(), options.gamma);

    using Key = std::pair<std::vector<int>, int>;
    std::map<Key, std::pair<TbicScore, TbicScore>> cache;
    SelectionResult result;

    auto key_of = [](std::vector<int> included, int p) {
        std::sort(included.begin(), included.end());
        return Key{std::move(included), p};
    };

    // Evaluates (GR, NG) for every (included, proposal) pair not already cached.
    auto evaluate = [&](const std::vector<std::pair<std::vector<int>, int>>& jobs) {
        std::vector<std::pair<std::vector<int>, int>> todo;
        for (const auto& [inc, p] : jobs)
            if (!cache.count(key_of(inc, p))) todo.emplace_back(inc, p);
        std::vector<std::optional<std::pair<TbicScore, TbicScore>>> scores(todo.size());
        parallel_for(static_cast<int>(todo.size()), options.threads, [&](int j) {
            const auto& [inc, p] = todo[static_cast<std::size_t>(j)];
            scores[static_cast<std::size_t>(j)] =
                std::make_pair(tbic_grouping(data, inc, p, options), tbic_nogrouping(data, inc, p, options));
        });
        for (std::size_t j = 0; j < todo.size(); ++j) {
            const auto& s = *scores[j];
            if (s.first.n_kept != expected_kept || s.second.n_kept != expected_kept) {
                throw EstimationError("Grouping and No-Grouping fits disagree on the kept count");
            }
            cache.emplace(key_of(todo[j].first, todo[j].second), s);
            ++result.n_evaluations;
        }
    };

    std::vector<int> included;
    int rejections = 0;
    bool add_stage = true;
    for (int stage = 0; stage < 2 * P && rejections < 2; ++stage, add_stage = !add_stage) {
        StepRecord rec;
        rec.kind = add_stage ? StepKind::Add : StepKind::Remove;
        rec.included_before = included;

        std::vector<std::pair<std::vector<int>, int>> jobs;
        if (add_stage) {
            for (int v = 0; v < P; ++v)
                if (std::find(included.begin(), included.end(), v) == included.end()) jobs.emplace_back(included, v);
        } else {
            for (int v : included) {
                std::vector<int> rest;
                for (int u : included)
                    if (u != v) rest.push_back(u);
                jobs.emplace_back(rest, v);
            }
        }
        if (jobs.empty()) {
            ++rejections;
            result.steps.push_back(std::move(rec));
            continue;
        }
        evaluate(jobs);

        // Ties go to the lowest column index.
        std::optional<std::size_t> pick;
        double pick_diff = 0.0;
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            const auto& [gr, ng] = cache.at(key_of(jobs[j].first, jobs[j].second));
            const double diff = gr.score - ng.score;
            rec.candidates.emplace_back(jobs[j].second, diff);
            const bool better = !pick || (add_stage ? diff > pick_diff : diff < pick_diff) ||
                                (diff == pick_diff && jobs[j].second < jobs[*pick].second);
            if (better) {
                pick = j;
                pick_diff = diff;
            }
        }
        const auto& [gr, ng] = cache.at(key_of(jobs[*pick].first, jobs[*pick].second));
        rec.variable = jobs[*pick].second;
        rec.tbic_grouping = gr.score;
        rec.tbic_nogrouping = ng.score;
        rec.difference = pick_diff;
        rec.grouping_discarded = gr.trimming.discarded();
        rec.nogrouping_discarded = ng.trimming.discarded();
        rec.regressors = ng.regressors;
        rec.accepted = add_stage ? pick_diff > 0.0 : pick_diff < 0.0;
        if (rec.accepted) {
            rejections = 0;
            if (add_stage) {
                included.push_back(rec.variable);
            } else {
                included.erase(std::find(included.begin(), included.end(), rec.variable));
            }
        } else {
            ++rejections;
        }
        result.steps.push_back(std::move(rec));
    }
    result.selected = included;
    if (included.empty()) result.diagnostic = "no variable showed grouping evidence; selection is empty";
    else if (rejections < 2) result.diagnostic = "stopped at the stage cap of 2P stages";
    return result;
}

}  // namespace robsel
