#include "robsel/simlab.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>

#include "robsel/concentration.hpp"
#include "robsel/ml_subset.hpp"
#include "robsel/redda.hpp"
#include "robsel/tbic.hpp"

namespace robsel {

Eigen::Matrix3d DgpSpec::class_covariance(int g) const {
    Eigen::Matrix3d s;
    const double r = rho.at(static_cast<std::size_t>(g));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s(i, j) = std::pow(r, std::abs(i - j));
    return s;
}

Eigen::Vector4d DgpSpec::redundant_mean(int g) const {
    const Eigen::Vector3d& m = mu.at(static_cast<std::size_t>(g));
    return (Eigen::RowVector2d(m[0], m[2]) * B).transpose();
}

void DgpSpec::validate() const {
    if (tau.empty() || tau.size() != mu.size() || tau.size() != rho.size()) {
        throw ValidationError("tau, mu and rho must have one entry per class");
    }
    double s = 0.0;
    for (double t : tau) {
        if (!(t > 0.0)) throw ValidationError("class proportions must be positive");
        s += t;
    }
    if (std::abs(s - 1.0) > 1e-12) throw ValidationError("class proportions must sum to 1");
    for (double r : rho)
        if (!(std::abs(r) < 1.0)) throw ValidationError("rho must lie in (-1, 1)");
    if (eta.size() != 9 || delta.size() != 9) throw ValidationError("eta and delta must have length 9");
    if ((delta.array() <= 0.0).any()) throw ValidationError("delta variances must be positive");
}

LabeledDataset generate_clean(int n, const DgpSpec& spec, std::uint64_t seed) {
    if (n < 1) throw ValidationError("sample size must be positive");
    spec.validate();
    const int G = spec.n_classes();
    Rng rng(seed);
    std::discrete_distribution<int> pick(spec.tau.begin(), spec.tau.end());
    std::normal_distribution<double> z(0.0, 1.0);

    std::vector<Eigen::Matrix3d> chol;
    for (int g = 0; g < G; ++g) chol.push_back(spec.class_covariance(g).llt().matrixL());

    LabeledDataset out;
    out.x.resize(n, DgpSpec::n_vars());
    out.labels.resize(static_cast<std::size_t>(n));
    out.n_classes = G;
    for (int i = 0; i < n; ++i) {
        const int g = pick(rng);
        out.labels[static_cast<std::size_t>(i)] = g;
        Eigen::Vector3d e;
        for (int k = 0; k < 3; ++k) e[k] = z(rng);
        const Eigen::Vector3d rel = spec.mu[static_cast<std::size_t>(g)] + chol[static_cast<std::size_t>(g)] * e;
        out.x.row(i).head<3>() = rel.transpose();
        const Eigen::RowVector4d red = Eigen::RowVector2d(rel[0], rel[2]) * spec.B;
        for (int k = 0; k < 4; ++k) out.x(i, 3 + k) = red[k] + z(rng);
        for (int k = 0; k < 9; ++k) out.x(i, 7 + k) = spec.eta[k] + std::sqrt(spec.delta[k]) * z(rng);
    }
    for (int j = 0; j < DgpSpec::n_vars(); ++j) out.feature_names.push_back("x" + std::to_string(j + 1));
    for (int g = 0; g < G; ++g) out.class_names.push_back(std::to_string(g + 1));
    for (int i = 0; i < n; ++i) out.row_ids.push_back(std::to_string(i + 1));
    return out;
}

bool is_constrained_outlier(const Eigen::VectorXd& row, const DgpSpec& dgp, double chi2_prob) {
    if (row.size() != DgpSpec::n_vars()) throw ValidationError("outlier row must have 16 entries");
    const double q3 = chi_square_quantile(3, chi2_prob);
    const double q4 = chi_square_quantile(4, chi2_prob);
    const double q9 = chi_square_quantile(9, chi2_prob);
    const Eigen::VectorXd rel = row.head(3), red = row.segment(3, 4), irr = row.tail(9);
    for (int g = 0; g < dgp.n_classes(); ++g) {
        if (squared_mahalanobis(rel, dgp.mu[static_cast<std::size_t>(g)], dgp.class_covariance(g)) <= q3) return false;
        if ((red - dgp.redundant_mean(g)).squaredNorm() <= q4) return false;
    }
    return ((irr - dgp.eta).array().square() / dgp.delta.array()).sum() > q9;
}

Contaminated contaminate(const LabeledDataset& data, const ContaminationSpec& spec, const DgpSpec& dgp) {
    data.validate();
    if (data.cols() != DgpSpec::n_vars() || data.n_classes != dgp.n_classes()) {
        throw ValidationError("contamination needs data shaped like the benchmark generator");
    }
    if (spec.n_label_noise < 0 || spec.n_outliers < 0) throw ValidationError("contamination counts must be nonnegative");
    if (!(spec.chi2_prob > 0.0 && spec.chi2_prob < 1.0)) throw ValidationError("chi2_prob must lie in (0, 1)");

    Contaminated out;
    out.data = data;
    const int N = data.rows();
    if (spec.n_label_noise > 0) {
        if (data.n_classes < 4) throw ValidationError("label noise needs at least four classes");
        std::vector<int> fourth;
        for (int i = 0; i < N; ++i)
            if (data.labels[static_cast<std::size_t>(i)] == 3) fourth.push_back(i);
        if (static_cast<int>(fourth.size()) < spec.n_label_noise) {
            throw ValidationError("class 4 has " + std::to_string(fourth.size()) + " rows, fewer than the " +
                                  std::to_string(spec.n_label_noise) + " requested for label noise");
        }
        out.relabeled.assign(fourth.end() - spec.n_label_noise, fourth.end());
        for (int i : out.relabeled) out.data.labels[static_cast<std::size_t>(i)] = 2;
    }

    if (spec.n_outliers > 0) {
        Rng rng(spec.seed);
        const Eigen::RowVectorXd lo = data.x.colwise().minCoeff(), hi = data.x.colwise().maxCoeff();
        const Eigen::RowVectorXd pad = 0.5 * spec.box_widening * (hi - lo);
        const Eigen::RowVectorXd a = lo - pad, w = (hi - lo) + 2.0 * pad;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::uniform_int_distribution<int> label(0, data.n_classes - 1);
        out.data.x.conservativeResize(N + spec.n_outliers, Eigen::NoChange);
        Eigen::VectorXd row(DgpSpec::n_vars());
        for (int k = 0; k < spec.n_outliers; ++k) {
            long draws = 0;
            do {
                if (++draws > spec.max_draws) {
                    throw EstimationError("outlier rejection sampling exceeded " + std::to_string(spec.max_draws) +
                                          " draws; the proposal box is too tight");
                }
                for (int j = 0; j < DgpSpec::n_vars(); ++j) row[j] = a[j] + w[j] * u(rng);
            } while (!is_constrained_outlier(row, dgp, spec.chi2_prob));
            out.data.x.row(N + k) = row.transpose();
            out.data.labels.push_back(label(rng));
            if (!out.data.row_ids.empty()) out.data.row_ids.push_back("o" + std::to_string(k + 1));
            out.outliers.push_back(N + k);
        }
    }
    out.planted = out.relabeled;
    out.planted.insert(out.planted.end(), out.outliers.begin(), out.outliers.end());
    std::sort(out.planted.begin(), out.planted.end());
    out.rate = static_cast<double>(spec.n_label_noise + spec.n_outliers) / (N + spec.n_outliers);
    return out;
}

double selection_precision(std::span<const int> selected, std::span<const int> relevant) {
    if (selected.empty()) return 0.0;
    int hit = 0;
    for (int s : selected)
        if (std::find(relevant.begin(), relevant.end(), s) != relevant.end()) ++hit;
    return static_cast<double>(hit) / static_cast<double>(selected.size());
}

double misclassification_error(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) throw ValidationError("prediction and truth lengths differ");
    if (truth.empty()) throw ValidationError("cannot score an empty prediction");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i];
    return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

std::string_view to_string(Selector s) {
    switch (s) {
        case Selector::Tbic: return "tbic";
        case Selector::MlSubset: return "ml-subset";
        case Selector::None: return "none";
    }
    return "?";
}

Selector parse_selector(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (auto v : {Selector::Tbic, Selector::MlSubset, Selector::None})
        if (to_string(v) == lower) return v;
    throw ValidationError("unknown selector '" + std::string(s) + "'");
}

void ExperimentConfig::validate() const {
    if (replications < 1) throw ValidationError("replications must be positive");
    if (n_train < 1 || n_test < 1) throw ValidationError("n_train and n_test must be positive");
    if (scenarios.empty()) throw ValidationError("at least one scenario is required");
    if (methods.empty()) throw ValidationError("at least one method is required");
    for (const auto& s : scenarios)
        if (s.n_label_noise < 0 || s.n_outliers < 0) throw ValidationError("scenario counts must be nonnegative");
    for (const auto& m : methods) {
        if (m.gamma && (*m.gamma < 0.0 || *m.gamma >= 0.5)) throw ValidationError("method gamma must lie in [0, 0.5)");
        if (m.selector == Selector::MlSubset && (m.p < 1 || m.p > DgpSpec::n_vars())) {
            throw ValidationError("ML subset size must lie in [1, 16]");
        }
    }
    if (tbic_starts < 1 || ml_inits < 1 || classifier_starts < 1) throw ValidationError("start counts must be positive");
    dgp.validate();
}

namespace {

double oracle_gamma(const Contaminated& c) {
    const int N = c.data.rows();
    const int k = static_cast<int>(c.planted.size());
    return static_cast<double>(k) / N;
}

std::vector<int> run_selector(const LabeledDataset& data, const MethodSpec& m, double gamma, const ExperimentConfig& cfg,
                              std::uint64_t seed) {
    switch (m.selector) {
        case Selector::Tbic: {
            TbicOptions o;
            o.model = cfg.model;
            o.gamma = gamma;
            o.n_start = cfg.tbic_starts;
            o.seed = seed;
            return greedy_select(data, o).selected;
        }
        case Selector::MlSubset: {
            MlSubsetOptions o;
            o.model = cfg.model;
            o.gamma = gamma;
            o.n_init = cfg.ml_inits;
            o.seed = seed;
            return fit_ml_subset(data, m.p, o).partition.relevant;
        }
        case Selector::None: {
            std::vector<int> all(static_cast<std::size_t>(data.cols()));
            std::iota(all.begin(), all.end(), 0);
            return all;
        }
    }
    return {};
}

double sample_sd(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<CellSummary> summarize(const ExperimentConfig& config, const std::vector<ReplicationRecord>& records) {
    std::vector<CellSummary> cells;
    for (int s = 0; s < static_cast<int>(config.scenarios.size()); ++s) {
        for (int m = 0; m < static_cast<int>(config.methods.size()); ++m) {
            CellSummary c;
            c.scenario = s;
            c.method = m;
            std::vector<double> prec, err;
            for (const auto& r : records) {
                if (r.scenario != s || r.method != m) continue;
                if (!r.error.empty()) {
                    ++c.n_failed;
                    continue;
                }
                ++c.n_ok;
                c.n_exact += r.exact;
                prec.push_back(r.precision);
                if (r.test_error) err.push_back(*r.test_error);
            }
            if (!prec.empty()) {
                c.mean_precision = std::accumulate(prec.begin(), prec.end(), 0.0) / static_cast<double>(prec.size());
                c.sd_precision = sample_sd(prec, c.mean_precision);
                c.median_precision = median(prec);
            }
            if (!err.empty()) {
                c.mean_error = std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(err.size());
                c.sd_error = sample_sd(err, *c.mean_error);
            }
            cells.push_back(c);
        }
    }
    return cells;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const int S = static_cast<int>(config.scenarios.size());
    const int M = static_cast<int>(config.methods.size());
    const int R = config.replications;
    std::vector<ReplicationRecord> records(static_cast<std::size_t>(S * R * M));

    parallel_for(S * R, config.threads, [&](int job) {
        const int s = job / R, r = job % R;
        const std::uint64_t rep_seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
        const LabeledDataset train = generate_clean(config.n_train, config.dgp, derive_seed(rep_seed, 0));
        const LabeledDataset test = config.classify ? generate_clean(config.n_test, config.dgp, derive_seed(rep_seed, 1))
                                                    : LabeledDataset{};
        ContaminationSpec cs;
        cs.n_label_noise = config.scenarios[static_cast<std::size_t>(s)].n_label_noise;
        cs.n_outliers = config.scenarios[static_cast<std::size_t>(s)].n_outliers;
        cs.seed = derive_seed(rep_seed, 100 + static_cast<std::uint64_t>(s));
        std::optional<Contaminated> contaminated;
        std::string setup_error;
        try {
            contaminated = contaminate(train, cs, config.dgp);
        } catch (const Error& e) {
            setup_error = e.what();
        }
        for (int m = 0; m < M; ++m) {
            const MethodSpec& method = config.methods[static_cast<std::size_t>(m)];
            ReplicationRecord& rec = records[static_cast<std::size_t>((s * R + r) * M + m)];
            rec.scenario = s;
            rec.method = m;
            rec.replication = r;
            if (!contaminated) {
                rec.error = setup_error;
                continue;
            }
            const std::uint64_t seed = derive_seed(rep_seed, 1000 + 100 * static_cast<std::uint64_t>(s) + m);
            try {
                rec.gamma = method.gamma ? *method.gamma : oracle_gamma(*contaminated);
                rec.selected = run_selector(contaminated->data, method, rec.gamma, config, seed);
                std::sort(rec.selected.begin(), rec.selected.end());
                rec.precision = selection_precision(rec.selected, relevant_columns());
                rec.exact = rec.selected == relevant_columns();
                if (config.classify) {
                    ReddaOptions o;
                    o.model = config.model;
                    o.gamma = rec.gamma;
                    o.n_start = config.classifier_starts;
                    o.seed = derive_seed(seed, 1);
                    const ReddaFit fit = fit_redda(select_columns(contaminated->data, rec.selected), o);
                    const Prediction pred = predict_map(fit, select_columns(test.x, rec.selected));
                    rec.test_error = misclassification_error(pred.labels, test.labels);
                }
            } catch (const Error& e) {
                rec.error = e.what();
            }
        }
    });

    ExperimentReport out;
    out.config = config;
    out.records = std::move(records);
    out.cells = summarize(config, out.records);
    return out;
}

int hamming_distance(std::span<const int> a, std::span<const int> b) {
    std::vector<int> x(a.begin(), a.end()), y(b.begin(), b.end()), d;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::set_symmetric_difference(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(d));
    return static_cast<int>(d.size());
}

double normalized_edit_distance(std::span<const int> a, std::span<const int> b) {
    std::vector<int> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const std::size_t n = x.size(), m = y.size();
    if (n == 0 && m == 0) return 0.0;
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[m]) / static_cast<double>(std::max(n, m));
}

GammaMonitorReport gamma_monitor(const LabeledDataset& data, const GammaMonitorConfig& config) {
    if (config.grid.empty()) throw ValidationError("gamma grid is empty");
    for (std::size_t i = 0; i < config.grid.size(); ++i) {
        if (config.grid[i] < 0.0 || config.grid[i] >= 0.5) throw ValidationError("gamma grid values must lie in [0, 0.5)");
        if (i > 0 && !(config.grid[i] < config.grid[i - 1])) throw ValidationError("gamma grid must be strictly descending");
    }
    GammaMonitorReport out;
    out.grid = config.grid;
    out.selections.resize(config.grid.size());
    parallel_for(static_cast<int>(config.grid.size()), config.threads, [&](int i) {
        const double gamma = config.grid[static_cast<std::size_t>(i)];
        if (config.selector == Selector::MlSubset) {
            MlSubsetOptions o;
            o.model = config.model;
            o.gamma = gamma;
            o.n_init = config.n_start;
            o.seed = config.seed;
            out.selections[static_cast<std::size_t>(i)] = fit_ml_subset(data, config.p, o).partition.relevant;
        } else if (config.selector == Selector::Tbic) {
            TbicOptions o;
            o.model = config.model;
            o.gamma = gamma;
            o.n_start = config.n_start;
            o.seed = config.seed;
            out.selections[static_cast<std::size_t>(i)] = greedy_select(data, o).selected;
        } else {
            throw ValidationError("gamma monitoring needs a selector");
        }
    });
    for (std::size_t i = 1; i < out.selections.size(); ++i) {
        const double d = config.selector == Selector::MlSubset
                             ? hamming_distance(out.selections[i - 1], out.selections[i])
                             : normalized_edit_distance(out.selections[i - 1], out.selections[i]);
        out.distances.push_back(d);
        if (d > 0.0 && !out.first_unstable) out.first_unstable = static_cast<int>(i);
    }
    return out;
}

}  // namespace robsel
