#include "robsel/report.hpp"

#include <set>

namespace robsel {

std::string render(const Json& report) { return report.dump(2) + "\n"; }

Json variable_json(const LabeledDataset& data, int column) {
    const std::string name = data.feature_names.empty() ? "x" + std::to_string(column + 1)
                                                        : data.feature_names.at(static_cast<std::size_t>(column));
    return Json{{"name", name}, {"column", column + 1}};
}

Json variables_json(const LabeledDataset& data, std::span<const int> columns) {
    Json out = Json::array();
    for (int c : columns) out.push_back(variable_json(data, c));
    return out;
}

Json class_mapping_json(const LabeledDataset& data) {
    Json out = Json::array();
    for (int g = 0; g < data.n_classes; ++g) {
        const std::string name =
            data.class_names.empty() ? std::to_string(g + 1) : data.class_names.at(static_cast<std::size_t>(g));
        out.push_back(Json{{"level", name}, {"class", g + 1}});
    }
    return out;
}

Json rows_json(const LabeledDataset& data, std::span<const int> rows) {
    Json out = Json::array();
    for (int r : rows) out.push_back(data.row_ids.empty() ? std::to_string(r + 1) : data.row_ids.at(static_cast<std::size_t>(r)));
    return out;
}

namespace {

Json vec(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Json mat(const Eigen::MatrixXd& m) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vec(m.row(i).transpose()));
    return out;
}

std::string class_name(const LabeledDataset& data, int g) {
    return data.class_names.empty() ? std::to_string(g + 1) : data.class_names.at(static_cast<std::size_t>(g));
}

template <class T>
T take(const Json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw ValidationError("unknown key '" + k + "' in " + where);
}

}  // namespace

Json params_json(const ClassParams& params, const LabeledDataset& data, std::span<const int> columns) {
    Json classes = Json::array();
    for (int g = 0; g < params.n_classes(); ++g) {
        classes.push_back(Json{{"class", class_name(data, g)},
                               {"tau", params.tau[g]},
                               {"mean", vec(params.mu[static_cast<std::size_t>(g)])},
                               {"covariance", mat(params.sigma[static_cast<std::size_t>(g)])}});
    }
    Json out{{"variables", variables_json(data, columns)}, {"classes", classes}};
    if (params.pooled_mu) out["pooled_mean"] = vec(*params.pooled_mu);
    if (params.pooled_sigma) out["pooled_covariance"] = mat(*params.pooled_sigma);
    return out;
}

Json redda_json(const ReddaFit& fit, const LabeledDataset& data, std::span<const int> columns) {
    return Json{{"model", std::string(to_string(fit.model))},
                {"gamma", fit.trimming.gamma},
                {"trimmed_loglik", fit.trimmed_loglik},
                {"iterations", fit.n_iterations},
                {"converged", fit.converged},
                {"stopped_on_decrease", fit.stopped_on_decrease},
                {"best_start", fit.best_start},
                {"failed_starts", fit.failed_starts},
                {"n_kept", fit.trimming.n_kept()},
                {"trimmed_rows", rows_json(data, fit.trimming.discarded())},
                {"loglik_trace", fit.loglik_trace},
                {"params", params_json(fit.params, data, columns)}};
}

Json selection_json(const SelectionResult& result, const LabeledDataset& data) {
    Json steps = Json::array();
    for (const auto& s : result.steps) {
        Json candidates = Json::array();
        for (const auto& [v, d] : s.candidates) candidates.push_back(Json{{"variable", variable_json(data, v)}, {"difference", d}});
        Json step{{"kind", std::string(to_string(s.kind))},
                  {"variable", s.variable < 0 ? Json(nullptr) : variable_json(data, s.variable)},
                  {"included_before", variables_json(data, s.included_before)},
                  {"tbic_grouping", s.tbic_grouping},
                  {"tbic_nogrouping", s.tbic_nogrouping},
                  {"difference", s.difference},
                  {"accepted", s.accepted},
                  {"regressors", variables_json(data, s.regressors)},
                  {"grouping_trimmed_rows", rows_json(data, s.grouping_discarded)},
                  {"nogrouping_trimmed_rows", rows_json(data, s.nogrouping_discarded)},
                  {"candidates", candidates}};
        steps.push_back(std::move(step));
    }
    return Json{{"selected", variables_json(data, result.selected)},
                {"n_evaluations", result.n_evaluations},
                {"diagnostic", result.diagnostic},
                {"steps", steps}};
}

Json ml_subset_json(const MlSubsetFit& fit, const LabeledDataset& data) {
    std::vector<int> all(static_cast<std::size_t>(data.cols()));
    for (int j = 0; j < data.cols(); ++j) all[static_cast<std::size_t>(j)] = j;
    return Json{{"selected", variables_json(data, fit.partition.relevant)},
                {"irrelevant", variables_json(data, fit.partition.irrelevant)},
                {"objective", fit.objective},
                {"gamma", fit.trimming.gamma},
                {"n_init", fit.n_init_used},
                {"best_init", fit.best_init},
                {"failed_inits", fit.failed_inits},
                {"iterations", fit.iterations},
                {"converged", fit.converged},
                {"stopped_on_decrease", fit.stopped_on_decrease},
                {"objective_trace", fit.objective_trace},
                {"n_kept", fit.trimming.n_kept()},
                {"trimmed_rows", rows_json(data, fit.trimming.discarded())},
                {"link", Json{{"coef", mat(fit.link.coef)}, {"mean", vec(fit.link.mean)}, {"covariance", mat(fit.link.covariance)}}},
                {"params", params_json(fit.params, data, all)}};
}

Json prediction_json(const Prediction& pred, const LabeledDataset& train, const LabeledDataset& test) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < pred.labels.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        rows.push_back(Json{{"row", test.row_ids.empty() ? std::to_string(i + 1) : test.row_ids[i]},
                            {"class", class_name(train, pred.labels[i])},
                            {"posterior", vec(pred.posterior.row(r).transpose())}});
    }
    Json out{{"classes", class_mapping_json(train)}, {"predictions", rows}};
    if (!test.labels.empty()) {
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < pred.labels.size(); ++i) {
            // Test levels are mapped through the training levels when read.
            wrong += pred.labels[i] != test.labels[i];
        }
        out["misclassification_error"] = static_cast<double>(wrong) / static_cast<double>(pred.labels.size());
    }
    return out;
}

Json outlier_json(const OutlierScores& scores, const LabeledDataset& test, int top_k) {
    Json ranking = Json::array();
    for (std::size_t k = 0; k < scores.ranking.size(); ++k) {
        const int r = scores.ranking[k];
        ranking.push_back(Json{{"rank", k + 1},
                               {"row", test.row_ids.empty() ? std::to_string(r + 1) : test.row_ids[static_cast<std::size_t>(r)]},
                               {"log_density", scores.log_density[static_cast<std::size_t>(r)]}});
    }
    return Json{{"flagged", rows_json(test, scores.flagged(top_k))}, {"ranking", ranking}};
}

ExperimentConfig experiment_config_from_json(const Json& j) {
    check_keys(j, {"replications", "n_train", "n_test", "seed", "model", "tbic_starts", "ml_inits", "classifier_starts",
                   "classify", "threads", "scenarios", "methods"},
               "experiment config");
    ExperimentConfig c;
    try {
        c.replications = take(j, "replications", c.replications);
        c.n_train = take(j, "n_train", c.n_train);
        c.n_test = take(j, "n_test", c.n_test);
        c.seed = take(j, "seed", c.seed);
        c.model = parse_covariance_model(take<std::string>(j, "model", std::string(to_string(c.model))));
        c.tbic_starts = take(j, "tbic_starts", c.tbic_starts);
        c.ml_inits = take(j, "ml_inits", c.ml_inits);
        c.classifier_starts = take(j, "classifier_starts", c.classifier_starts);
        c.classify = take(j, "classify", c.classify);
        c.threads = take(j, "threads", c.threads);
        if (j.contains("scenarios")) {
            c.scenarios.clear();
            for (const auto& s : j.at("scenarios")) {
                check_keys(s, {"n_label_noise", "n_outliers"}, "scenario");
                c.scenarios.push_back(Scenario{take(s, "n_label_noise", 0), take(s, "n_outliers", 0)});
            }
        }
        if (j.contains("methods")) {
            for (const auto& m : j.at("methods")) {
                check_keys(m, {"name", "selector", "gamma", "p"}, "method");
                MethodSpec spec;
                spec.selector = parse_selector(take<std::string>(m, "selector", "tbic"));
                spec.p = take(m, "p", spec.p);
                if (m.contains("gamma")) {
                    const Json& g = m.at("gamma");
                    if (g.is_string()) {
                        if (g.get<std::string>() != "oracle") throw ValidationError("method gamma must be a number or \"oracle\"");
                    } else {
                        spec.gamma = g.get<double>();
                    }
                } else {
                    spec.gamma = 0.05;
                }
                spec.name = take<std::string>(m, "name", std::string(to_string(spec.selector)));
                c.methods.push_back(std::move(spec));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("experiment config: ") + e.what());
    }
    if (c.methods.empty()) {
        c.methods.push_back(MethodSpec{"tbic", Selector::Tbic, 0.05, 3});
        c.methods.push_back(MethodSpec{"ml-subset-p3", Selector::MlSubset, 0.05, 3});
    }
    c.validate();
    return c;
}

Json experiment_config_json(const ExperimentConfig& c) {
    Json scenarios = Json::array();
    for (const auto& s : c.scenarios) scenarios.push_back(Json{{"n_label_noise", s.n_label_noise}, {"n_outliers", s.n_outliers}});
    Json methods = Json::array();
    for (const auto& m : c.methods) {
        Json j{{"name", m.name}, {"selector", std::string(to_string(m.selector))}};
        j["gamma"] = m.gamma ? Json(*m.gamma) : Json("oracle");
        if (m.selector == Selector::MlSubset) j["p"] = m.p;
        methods.push_back(std::move(j));
    }
    return Json{{"replications", c.replications},
                {"n_train", c.n_train},
                {"n_test", c.n_test},
                {"seed", c.seed},
                {"model", std::string(to_string(c.model))},
                {"tbic_starts", c.tbic_starts},
                {"ml_inits", c.ml_inits},
                {"classifier_starts", c.classifier_starts},
                {"classify", c.classify},
                {"threads", c.threads},
                {"scenarios", scenarios},
                {"methods", methods}};
}

Json experiment_json(const ExperimentReport& report) {
    const auto& c = report.config;
    Json records = Json::array();
    for (const auto& r : report.records) {
        Json j{{"scenario", r.scenario},
               {"method", c.methods[static_cast<std::size_t>(r.method)].name},
               {"replication", r.replication + 1},
               {"gamma", r.gamma}};
        std::vector<int> one_based;
        for (int v : r.selected) one_based.push_back(v + 1);
        j["selected"] = one_based;
        j["precision"] = r.precision;
        j["exact"] = r.exact;
        j["test_error"] = r.test_error ? Json(*r.test_error) : Json(nullptr);
        if (!r.error.empty()) j["error"] = r.error;
        records.push_back(std::move(j));
    }
    Json cells = Json::array();
    for (const auto& s : report.cells) {
        const auto& sc = c.scenarios[static_cast<std::size_t>(s.scenario)];
        cells.push_back(Json{{"scenario", s.scenario},
                             {"n_label_noise", sc.n_label_noise},
                             {"n_outliers", sc.n_outliers},
                             {"method", c.methods[static_cast<std::size_t>(s.method)].name},
                             {"n_ok", s.n_ok},
                             {"n_failed", s.n_failed},
                             {"n_exact", s.n_exact},
                             {"mean_precision", s.mean_precision},
                             {"sd_precision", s.sd_precision},
                             {"median_precision", s.median_precision},
                             {"mean_error", s.mean_error ? Json(*s.mean_error) : Json(nullptr)},
                             {"sd_error", s.sd_error ? Json(*s.sd_error) : Json(nullptr)}});
    }
    return Json{{"config", experiment_config_json(c)}, {"summary", cells}, {"records", records}};
}

Json gamma_monitor_json(const GammaMonitorReport& report, const GammaMonitorConfig& config, const LabeledDataset& data) {
    Json points = Json::array();
    for (std::size_t i = 0; i < report.grid.size(); ++i) {
        Json p{{"gamma", report.grid[i]}, {"selected", variables_json(data, report.selections[i])}};
        p["distance_to_previous"] = i == 0 ? Json(nullptr) : Json(report.distances[i - 1]);
        points.push_back(std::move(p));
    }
    return Json{{"selector", std::string(to_string(config.selector))},
                {"distance", config.selector == Selector::MlSubset ? "hamming" : "normalized-edit"},
                {"points", points},
                {"first_unstable_gamma", report.first_unstable ? Json(report.grid[static_cast<std::size_t>(*report.first_unstable)])
                                                               : Json(nullptr)}};
}

}  // namespace robsel
