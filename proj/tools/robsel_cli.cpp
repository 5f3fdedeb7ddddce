// robsel: robust discriminant analysis and variable selection from the command line.
//
// Exit codes: 0 success, 1 validation error, 2 estimation error, 3 I/O error.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "robsel/dataset_io.hpp"
#include "robsel/ml_subset.hpp"
#include "robsel/redda.hpp"
#include "robsel/report.hpp"
#include "robsel/scoring.hpp"
#include "robsel/simlab.hpp"
#include "robsel/tbic.hpp"

using namespace robsel;

namespace {

// --config files are JSON objects whose keys are long flag names without dashes.
// Keys apply to the subcommand being run; flags on the command line win.
class JsonConfig : public CLI::Config {
  public:
    explicit JsonConfig(const CLI::App* root) : root_(root) {}

    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        Json j;
        try {
            j = Json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw ValidationError("config must be a JSON object");
        const auto subs = root_->get_subcommands();
        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, value] : j.items()) {
            if (value.is_null()) continue;
            CLI::ConfigItem item;
            if (!subs.empty()) item.parents.push_back(subs.front()->get_name());
            item.name = key;
            if (value.is_array()) {
                for (const auto& v : value) item.inputs.push_back(scalar(v));
            } else {
                item.inputs.push_back(scalar(value));
            }
            items.push_back(std::move(item));
        }
        return items;
    }

  private:
    const CLI::App* root_;

    static std::string scalar(const Json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number()) return v.dump();
        throw ValidationError("config values must be scalars or arrays of scalars");
    }
};

Json typed(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    try {
        std::size_t pos = 0;
        const long long i = std::stoll(s, &pos);
        if (pos == s.size()) return i;
    } catch (...) {
    }
    try {
        std::size_t pos = 0;
        const double d = std::stod(s, &pos);
        if (pos == s.size()) return d;
    } catch (...) {
    }
    return s;
}

// Resolved option values of a subcommand, keyed like a --config file.
Json echo_options(const CLI::App* app) {
    Json out = Json::object();
    for (const CLI::Option* opt : app->get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config" || name == "out" || name == "timing") continue;
        std::vector<std::string> values = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
        if (values.empty()) {
            const std::string def = opt->get_default_str();
            if (def.empty()) continue;
            if (opt->get_items_expected_max() > 1 && def.front() == '[') {
                std::string inner = def.substr(1, def.size() - 2);
                std::stringstream ss(inner);
                for (std::string item; std::getline(ss, item, ',');) values.push_back(item);
            } else {
                values.push_back(def);
            }
        }
        if (opt->get_items_expected_max() > 1) {
            Json arr = Json::array();
            for (const auto& v : values) arr.push_back(typed(v));
            out[name] = arr;
        } else if (opt->get_type_size() == 0) {
            out[name] = typed(values.back()) == Json(true) || values.back() == "1";
        } else {
            out[name] = typed(values.back());
        }
    }
    return out;
}

struct Options {
    std::string train, test, fit_report, selection, label_col, id_col, out, model = "VVV", search = "auto",
                method = "redda", selector = "tbic", config;
    std::vector<std::string> columns;
    std::vector<double> grid{0.2, 0.15, 0.1, 0.05, 0.0};
    double gamma = 0.05;
    int p = 0, n_start = 50, n_init = 20, max_iter = 100, threads = 1, top_k = 0, replications = 0;
    std::uint64_t seed = 0;
    bool timing = false;
};

DatasetReadOptions read_options(const Options& o, bool require_labels, std::vector<std::string> levels = {}) {
    DatasetReadOptions r;
    if (!o.label_col.empty()) r.label_column = o.label_col;
    if (!o.id_col.empty()) r.id_column = o.id_col;
    r.require_labels = require_labels;
    r.class_levels = std::move(levels);
    return r;
}

Json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path + "' is not valid JSON: " + e.what());
    }
}

int column_by_name(const LabeledDataset& data, const std::string& name, int fallback_column) {
    for (int j = 0; j < data.cols(); ++j)
        if (!data.feature_names.empty() && data.feature_names[static_cast<std::size_t>(j)] == name) return j;
    if (fallback_column >= 1 && fallback_column <= data.cols() && data.feature_names.empty()) return fallback_column - 1;
    throw ValidationError("variable '" + name + "' not found in the data");
}

// --columns accepts header names or 1-based indices; --selection takes a select-* report.
std::vector<int> resolve_columns(const Options& o, const LabeledDataset& data) {
    std::vector<int> cols;
    if (!o.selection.empty()) {
        const Json report = read_json(o.selection);
        if (!report.contains("selected")) throw ValidationError("'" + o.selection + "' has no selected variables");
        for (const auto& v : report.at("selected")) cols.push_back(column_by_name(data, v.at("name"), v.at("column")));
    }
    for (const auto& c : o.columns) {
        const Json t = typed(c);
        if (t.is_number_integer()) {
            const int k = t.get<int>();
            if (k < 1 || k > data.cols()) throw ValidationError("column " + c + " out of range");
            cols.push_back(k - 1);
        } else {
            cols.push_back(column_by_name(data, c, 0));
        }
    }
    if (cols.empty()) {
        cols.resize(static_cast<std::size_t>(data.cols()));
        for (int j = 0; j < data.cols(); ++j) cols[static_cast<std::size_t>(j)] = j;
    }
    return cols;
}

struct Classifier {
    ClassParams params;
    std::vector<std::string> variables;  // names, in parameter order
    std::vector<int> train_columns;      // 1-based, for headerless test files
    std::vector<std::string> classes;
    Json summary;
};

Classifier classifier_from_report(const Json& report) {
    Classifier c;
    try {
        const std::string command = report.at("command");
        const Json& params = report.at("fit").at("params");
        ClassParams full;
        const auto& classes = params.at("classes");
        full.tau.resize(static_cast<Eigen::Index>(classes.size()));
        for (std::size_t g = 0; g < classes.size(); ++g) {
            const auto& k = classes[g];
            c.classes.push_back(k.at("class"));
            full.tau[static_cast<Eigen::Index>(g)] = k.at("tau");
            const auto mean = k.at("mean").get<std::vector<double>>();
            full.mu.emplace_back(Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size())));
            const auto rows = k.at("covariance").get<std::vector<std::vector<double>>>();
            Eigen::MatrixXd s(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t j = 0; j < rows.size(); ++j) s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i].at(j);
            full.sigma.push_back(std::move(s));
        }
        std::vector<std::string> names;
        std::vector<int> columns;
        for (const auto& v : params.at("variables")) {
            names.push_back(v.at("name"));
            columns.push_back(v.at("column"));
        }
        if (command == "fit") {
            c.params = std::move(full);
            c.variables = std::move(names);
            c.train_columns = std::move(columns);
        } else if (command == "select-mlsubset") {
            std::vector<int> keep;
            for (const auto& v : report.at("selected")) {
                const std::string name = v.at("name");
                keep.push_back(static_cast<int>(std::find(names.begin(), names.end(), name) - names.begin()));
                c.variables.push_back(name);
                c.train_columns.push_back(v.at("column"));
            }
            c.params.tau = full.tau;
            for (std::size_t g = 0; g < full.mu.size(); ++g) {
                Eigen::VectorXd m(static_cast<Eigen::Index>(keep.size()));
                Eigen::MatrixXd s(m.size(), m.size());
                for (std::size_t a = 0; a < keep.size(); ++a) {
                    m[static_cast<Eigen::Index>(a)] = full.mu[g][keep[a]];
                    for (std::size_t b = 0; b < keep.size(); ++b)
                        s(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = full.sigma[g](keep[a], keep[b]);
                }
                c.params.mu.push_back(std::move(m));
                c.params.sigma.push_back(std::move(s));
            }
        } else {
            throw ValidationError("reports of '" + command + "' carry no classifier");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed fit report: ") + e.what());
    }
    return c;
}

ReddaOptions redda_options(const Options& o) {
    ReddaOptions r;
    r.model = parse_covariance_model(o.model);
    r.gamma = o.gamma;
    r.n_start = o.n_start;
    r.max_iter = o.max_iter;
    r.seed = o.seed;
    r.threads = o.threads;
    return r;
}

Classifier classifier_from_training(const Options& o) {
    const LabeledDataset train = load_dataset(o.train, read_options(o, true));
    Classifier c;
    const std::vector<int> cols = resolve_columns(o, train);
    const ReddaFit fit = fit_redda(select_columns(train, cols), redda_options(o));
    c.params = fit.params;
    for (int j : cols) {
        c.variables.push_back(train.feature_names[static_cast<std::size_t>(j)]);
        c.train_columns.push_back(j + 1);
    }
    c.classes = train.class_names;
    c.summary = redda_json(fit, train, cols);
    return c;
}

Classifier load_classifier(const Options& o) {
    if (!o.fit_report.empty()) return classifier_from_report(read_json(o.fit_report));
    if (o.train.empty()) throw ValidationError("either --fit or --train is required");
    return classifier_from_training(o);
}

std::vector<int> test_columns(const Classifier& c, const LabeledDataset& test) {
    std::vector<int> cols;
    for (std::size_t k = 0; k < c.variables.size(); ++k) cols.push_back(column_by_name(test, c.variables[k], c.train_columns[k]));
    return cols;
}

LabeledDataset class_frame(const std::vector<std::string>& classes) {
    LabeledDataset d;
    d.class_names = classes;
    d.n_classes = static_cast<int>(classes.size());
    return d;
}

void write_report(const Options& o, const Json& report) {
    const std::string text = render(report);
    if (o.out.empty() || o.out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(o.out);
    if (!out) throw IoError("cannot write '" + o.out + "'");
    out << text;
    if (!out) throw IoError("write to '" + o.out + "' failed");
}

Json header(const std::string& command, const CLI::App* app) {
    return Json{{"tool", "robsel"}, {"version", kVersion}, {"command", command}, {"config", echo_options(app)}};
}

void add_train_options(CLI::App* sub, Options& o, bool required) {
    auto* t = sub->add_option("--train", o.train, "Training table (delimited text with a header row)");
    if (required) t->required();
    sub->add_option("--label-col", o.label_col, "Label column name (default: 'class' or 'label')");
    sub->add_option("--id-col", o.id_col, "Row identifier column");
}

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--seed", o.seed, "Master random seed");
    sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "Report path (default: stdout)");
    sub->add_flag("--timing", o.timing, "Include wall-clock timing in the report");
}

void add_model(CLI::App* sub, Options& o) {
    sub->add_option("--gamma", o.gamma, "Trimming level in [0, 0.5)");
    sub->add_option("--model", o.model, "Covariance model (EII, VII, EEI, VEI, EVI, VVI, EEE, VVV)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust model-based discriminant analysis and variable selection"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.fallthrough();
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_config("--config", "", "JSON file whose keys mirror the long flags of the subcommand");
    app.config_formatter(std::make_shared<JsonConfig>(&app));
    Options o;

    auto setup = [&](const std::string& name, const std::string& desc) { return app.add_subcommand(name, desc); };

    CLI::App* fit = setup("fit", "Fit a REDDA classifier");
    add_train_options(fit, o, true);
    add_model(fit, o);
    fit->add_option("--columns", o.columns, "Variables to use, by name or 1-based index")->delimiter(',');
    fit->add_option("--selection", o.selection, "Use the variables selected in a select-* report");
    fit->add_option("--n-start,--n-init", o.n_start, "Random starts")->check(CLI::PositiveNumber);
    fit->add_option("--max-iter", o.max_iter, "Concentration steps per start")->check(CLI::PositiveNumber);
    add_common(fit, o);

    CLI::App* tbic = setup("select-tbic", "Greedy variable selection by trimmed BIC");
    add_train_options(tbic, o, true);
    add_model(tbic, o);
    tbic->add_option("--n-start,--n-init", o.n_start, "Random starts per REDDA fit")->default_val(10)->check(CLI::PositiveNumber);
    tbic->add_option("--max-iter", o.max_iter, "Concentration steps per start")->check(CLI::PositiveNumber);
    add_common(tbic, o);

    CLI::App* ml = setup("select-mlsubset", "Maximum-likelihood subset selection of p variables");
    add_train_options(ml, o, true);
    add_model(ml, o);
    ml->add_option("--p", o.p, "Subset size")->required()->check(CLI::PositiveNumber);
    ml->add_option("--n-init", o.n_init, "Restarts")->check(CLI::PositiveNumber);
    ml->add_option("--max-iter", o.max_iter, "Iterations per restart")->check(CLI::PositiveNumber);
    ml->add_option("--search", o.search, "S-step search: auto, exhaustive, genetic, closed-form");
    add_common(ml, o);

    CLI::App* predict = setup("predict", "Classify a test table by the MAP rule");
    predict->add_option("--fit", o.fit_report, "Report written by fit or select-mlsubset");
    add_train_options(predict, o, false);
    predict->add_option("--test", o.test, "Test table")->required();
    add_model(predict, o);
    predict->add_option("--columns", o.columns, "Variables to use when fitting from --train")->delimiter(',');
    predict->add_option("--selection", o.selection, "select-* report whose variables are used with --train");
    predict->add_option("--n-start,--n-init", o.n_start, "Random starts when fitting from --train")->check(CLI::PositiveNumber);
    add_common(predict, o);

    CLI::App* detect = setup("detect-outliers", "Rank test rows by estimated marginal density on the retained variables");
    detect->add_option("--fit", o.fit_report, "Report written by fit or select-mlsubset");
    add_train_options(detect, o, false);
    detect->add_option("--test", o.test, "Test table")->required();
    add_model(detect, o);
    detect->add_option("--method", o.method, "Model fitted from --train: redda or ml-subset")
        ->check(CLI::IsMember({"redda", "ml-subset"}));
    detect->add_option("--p", o.p, "Subset size for --method ml-subset");
    detect->add_option("--columns", o.columns, "Variables for --method redda")->delimiter(',');
    detect->add_option("--selection", o.selection, "select-* report whose variables are used with --train");
    detect->add_option("--n-start,--n-init", o.n_start, "Random starts or restarts")->check(CLI::PositiveNumber);
    detect->add_option("--top-k", o.top_k, "Number of rows to flag")->check(CLI::NonNegativeNumber);
    add_common(detect, o);

    CLI::App* simulate = setup("simulate", "Run a seeded contamination experiment");
    simulate->add_option("--config", o.config, "Experiment config (JSON)");
    simulate->add_option("--replications", o.replications, "Override the number of replications")->default_str("");
    add_common(simulate, o);

    CLI::App* monitor = setup("monitor-gamma", "Selection stability over a descending trimming grid");
    add_train_options(monitor, o, true);
    monitor->add_option("--model", o.model, "Covariance model");
    monitor->add_option("--grid", o.grid, "Descending trimming levels")->delimiter(',');
    monitor->add_option("--selector", o.selector, "tbic or ml-subset")->check(CLI::IsMember({"tbic", "ml-subset"}));
    monitor->add_option("--p", o.p, "Subset size for ml-subset");
    monitor->add_option("--n-start,--n-init", o.n_start, "TBIC starts or ML-subset restarts")->default_val(10)->check(CLI::PositiveNumber);
    add_common(monitor, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: validation: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
        return e.category() == std::string("io") ? 3 : 1;
    }

    const auto started = std::chrono::steady_clock::now();
    try {
        CLI::App* sub = app.get_subcommands().front();
        const std::string command = sub->get_name();
        Json report = header(command, sub);

        if (command == "fit") {
            const LabeledDataset train = load_dataset(o.train, read_options(o, true));
            const std::vector<int> cols = resolve_columns(o, train);
            const LabeledDataset used = select_columns(train, cols);
            const ReddaFit f = fit_redda(used, redda_options(o));
            report["classes"] = class_mapping_json(train);
            report["fit"] = redda_json(f, train, cols);
            Json reassigned = Json::array();
            for (const auto& r : reassign_trimmed(f, used)) {
                reassigned.push_back(Json{{"row", train.row_ids[static_cast<std::size_t>(r.row)]},
                                          {"observed", train.class_names[static_cast<std::size_t>(train.labels[static_cast<std::size_t>(r.row)])]},
                                          {"assigned", train.class_names[static_cast<std::size_t>(r.label)]}});
            }
            report["trimmed_reassignment"] = reassigned;
        } else if (command == "select-tbic") {
            const LabeledDataset train = load_dataset(o.train, read_options(o, true));
            TbicOptions t;
            t.model = parse_covariance_model(o.model);
            t.gamma = o.gamma;
            t.n_start = o.n_start;
            t.max_iter = o.max_iter;
            t.seed = o.seed;
            t.threads = o.threads;
            const SelectionResult r = greedy_select(train, t);
            report["classes"] = class_mapping_json(train);
            report["selected"] = variables_json(train, r.selected);
            report["selection"] = selection_json(r, train);
        } else if (command == "select-mlsubset") {
            const LabeledDataset train = load_dataset(o.train, read_options(o, true));
            MlSubsetOptions m;
            m.model = parse_covariance_model(o.model);
            m.gamma = o.gamma;
            m.n_init = o.n_init;
            m.max_iter = o.max_iter;
            m.search = parse_subset_search(o.search);
            m.seed = o.seed;
            m.threads = o.threads;
            const MlSubsetFit f = fit_ml_subset(train, o.p, m);
            report["classes"] = class_mapping_json(train);
            report["selected"] = variables_json(train, f.partition.relevant);
            report["fit"] = ml_subset_json(f, train);
        } else if (command == "predict") {
            const Classifier c = load_classifier(o);
            const LabeledDataset test = load_dataset(o.test, read_options(o, false, c.classes));
            const Prediction pred = predict_map(c.params, select_columns(test.x, test_columns(c, test)));
            if (!c.summary.is_null()) report["fit"] = c.summary;
            report["variables"] = c.variables;
            const Json body = prediction_json(pred, class_frame(c.classes), test);
            for (const auto& [k, v] : body.items()) report[k] = v;
        } else if (command == "detect-outliers") {
            OutlierScores scores;
            LabeledDataset test;
            std::vector<std::string> variables;
            if (o.fit_report.empty() && o.method == "ml-subset") {
                if (o.train.empty()) throw ValidationError("--train is required with --method ml-subset");
                if (o.p < 1) throw ValidationError("--p is required with --method ml-subset");
                const LabeledDataset train = load_dataset(o.train, read_options(o, true));
                MlSubsetOptions m;
                m.model = parse_covariance_model(o.model);
                m.gamma = o.gamma;
                m.n_init = o.n_start;
                m.seed = o.seed;
                m.threads = o.threads;
                const MlSubsetFit f = fit_ml_subset(train, o.p, m);
                test = load_dataset(o.test, read_options(o, false, train.class_names));
                if (test.cols() != train.cols()) throw ValidationError("test table must have the training variables");
                scores = outlier_score(f, test.x);
                for (int j : f.partition.relevant) variables.push_back(train.feature_names[static_cast<std::size_t>(j)]);
            } else {
                const Classifier c = load_classifier(o);
                test = load_dataset(o.test, read_options(o, false, c.classes));
                scores = outlier_score(c.params, test_columns(c, test), test.x);
                variables = c.variables;
            }
            report["variables"] = variables;
            const Json body = outlier_json(scores, test, o.top_k);
            for (const auto& [k, v] : body.items()) report[k] = v;
        } else if (command == "simulate") {
            ExperimentConfig cfg = o.config.empty() ? experiment_config_from_json(Json::object())
                                                    : experiment_config_from_json(read_json(o.config));
            if (sub->get_option("--seed")->count()) cfg.seed = o.seed;
            if (sub->get_option("--threads")->count()) cfg.threads = o.threads;
            if (o.replications > 0) cfg.replications = o.replications;
            report["config"] = experiment_config_json(cfg);
            const ExperimentReport r = run_experiment(cfg);
            const Json body = experiment_json(r);
            report["summary"] = body.at("summary");
            report["records"] = body.at("records");
        } else if (command == "monitor-gamma") {
            const LabeledDataset train = load_dataset(o.train, read_options(o, true));
            GammaMonitorConfig g;
            g.grid = o.grid;
            g.selector = parse_selector(o.selector);
            g.p = o.p;
            if (g.selector == Selector::MlSubset && g.p < 1) throw ValidationError("--p is required with --selector ml-subset");
            g.model = parse_covariance_model(o.model);
            g.n_start = o.n_start;
            g.seed = o.seed;
            g.threads = o.threads;
            report["monitor"] = gamma_monitor_json(gamma_monitor(train, g), g, train);
        }
        if (o.timing) {
            report["timing"] = Json{{"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()}};
        }
        write_report(o, report);
    } catch (const Error& e) {
        std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
        const std::string cat = e.category();
        return cat == "validation" ? 1 : cat == "estimation" ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: validation: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
