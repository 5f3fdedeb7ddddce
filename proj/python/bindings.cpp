#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "robsel/dataset_io.hpp"
#include "robsel/ml_subset.hpp"
#include "robsel/redda.hpp"
#include "robsel/report.hpp"
#include "robsel/scoring.hpp"
#include "robsel/simlab.hpp"
#include "robsel/tbic.hpp"

namespace py = pybind11;
using namespace robsel;

namespace {

LabeledDataset make_dataset(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
    LabeledDataset d;
    d.x = x;
    d.labels = labels;
    d.n_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    d.validate();
    return d;
}

py::dict params_dict(const ClassParams& p) {
    py::dict out;
    out["tau"] = p.tau;
    out["mu"] = p.mu;
    out["sigma"] = p.sigma;
    if (p.pooled_mu) out["pooled_mu"] = *p.pooled_mu;
    if (p.pooled_sigma) out["pooled_sigma"] = *p.pooled_sigma;
    return out;
}

ClassParams params_from(const py::dict& d) {
    ClassParams p;
    p.tau = d["tau"].cast<Eigen::VectorXd>();
    p.mu = d["mu"].cast<std::vector<Eigen::VectorXd>>();
    p.sigma = d["sigma"].cast<std::vector<Eigen::MatrixXd>>();
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "robsel core bindings";
    m.attr("__version__") = kVersion;

    static py::exception<ValidationError> validation(m, "ValidationError", PyExc_ValueError);
    static py::exception<EstimationError> estimation(m, "EstimationError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ValidationError& e) {
            py::set_error(validation, e.what());
        } catch (const EstimationError& e) {
            py::set_error(estimation, e.what());
        } catch (const IoError& e) {
            py::set_error(PyExc_OSError, e.what());
        }
    });

    m.def("chi_square_quantile", &chi_square_quantile, py::arg("df"), py::arg("prob"));
    m.def("gaussian_logpdf", &gaussian_logpdf, py::arg("x"), py::arg("mu"), py::arg("sigma"));

    m.def(
        "load_dataset",
        [](const std::string& path, std::optional<std::string> label_col) {
            DatasetReadOptions o;
            o.label_column = std::move(label_col);
            const LabeledDataset d = load_dataset(path, o);
            py::dict out;
            out["x"] = d.x;
            out["labels"] = d.labels;
            out["classes"] = d.class_names;
            out["features"] = d.feature_names;
            return out;
        },
        py::arg("path"), py::arg("label_col") = py::none());

    m.def(
        "fit_redda",
        [](const Eigen::MatrixXd& x, const std::vector<int>& labels, const std::string& model, double gamma, int n_start,
           int max_iter, std::uint64_t seed) {
            ReddaOptions o;
            o.model = parse_covariance_model(model);
            o.gamma = gamma;
            o.n_start = n_start;
            o.max_iter = max_iter;
            o.seed = seed;
            const ReddaFit f = fit_redda(make_dataset(x, labels), o);
            py::dict out = params_dict(f.params);
            out["trimmed"] = f.trimming.discarded();
            out["trimmed_loglik"] = f.trimmed_loglik;
            out["converged"] = f.converged;
            out["loglik_trace"] = f.loglik_trace;
            return out;
        },
        py::arg("x"), py::arg("labels"), py::arg("model") = "VVV", py::arg("gamma") = 0.05, py::arg("n_start") = 50,
        py::arg("max_iter") = 200, py::arg("seed") = 0);

    m.def(
        "predict_map",
        [](const py::dict& params, const Eigen::MatrixXd& test) {
            const Prediction p = predict_map(params_from(params), test);
            return py::make_tuple(p.posterior, p.labels);
        },
        py::arg("params"), py::arg("test"), "Returns (posterior, labels).");

    m.def(
        "greedy_select",
        [](const Eigen::MatrixXd& x, const std::vector<int>& labels, double gamma, const std::string& model, int n_start,
           std::uint64_t seed) {
            TbicOptions o;
            o.model = parse_covariance_model(model);
            o.gamma = gamma;
            o.n_start = n_start;
            o.seed = seed;
            const SelectionResult r = greedy_select(make_dataset(x, labels), o);
            py::list steps;
            for (const auto& s : r.steps) {
                py::dict d;
                d["kind"] = std::string(to_string(s.kind));
                d["variable"] = s.variable;
                d["difference"] = s.difference;
                d["accepted"] = s.accepted;
                steps.append(d);
            }
            py::dict out;
            out["selected"] = r.selected;
            out["steps"] = steps;
            return out;
        },
        py::arg("x"), py::arg("labels"), py::arg("gamma") = 0.05, py::arg("model") = "VVV", py::arg("n_start") = 10,
        py::arg("seed") = 0);

    m.def(
        "fit_ml_subset",
        [](const Eigen::MatrixXd& x, const std::vector<int>& labels, int p, double gamma, const std::string& model,
           int n_init, int max_iter, std::uint64_t seed) {
            MlSubsetOptions o;
            o.model = parse_covariance_model(model);
            o.gamma = gamma;
            o.n_init = n_init;
            o.max_iter = max_iter;
            o.seed = seed;
            const MlSubsetFit f = fit_ml_subset(make_dataset(x, labels), p, o);
            py::dict out = params_dict(f.params);
            out["selected"] = f.partition.relevant;
            out["objective"] = f.objective;
            out["trimmed"] = f.trimming.discarded();
            out["link_coef"] = f.link.coef;
            out["link_mean"] = f.link.mean;
            out["link_covariance"] = f.link.covariance;
            return out;
        },
        py::arg("x"), py::arg("labels"), py::arg("p"), py::arg("gamma") = 0.05, py::arg("model") = "VVV",
        py::arg("n_init") = 20, py::arg("max_iter") = 100, py::arg("seed") = 0);

    m.def(
        "outlier_score",
        [](const py::dict& params, const std::vector<int>& columns, const Eigen::MatrixXd& test) {
            const OutlierScores s = outlier_score(params_from(params), columns, test);
            return py::make_tuple(s.log_density, s.ranking);
        },
        py::arg("params"), py::arg("columns"), py::arg("test"),
        "Log marginal density on `columns` and the ascending ranking. Returns (log_density, ranking).");

    m.def(
        "generate_clean",
        [](int n, std::uint64_t seed) {
            const LabeledDataset d = generate_clean(n, DgpSpec{}, seed);
            return py::make_tuple(d.x, d.labels);
        },
        py::arg("n"), py::arg("seed") = 0);

    m.def(
        "contaminate",
        [](const Eigen::MatrixXd& x, const std::vector<int>& labels, int n_label_noise, int n_outliers,
           std::uint64_t seed) {
            ContaminationSpec s;
            s.n_label_noise = n_label_noise;
            s.n_outliers = n_outliers;
            s.seed = seed;
            LabeledDataset d = make_dataset(x, labels);
            d.n_classes = DgpSpec{}.n_classes();
            const Contaminated c = contaminate(d, s);
            return py::make_tuple(c.data.x, c.data.labels, c.planted);
        },
        py::arg("x"), py::arg("labels"), py::arg("n_label_noise"), py::arg("n_outliers"), py::arg("seed") = 0);

    m.def("selection_precision", [](const std::vector<int>& s, const std::vector<int>& r) { return selection_precision(s, r); },
          py::arg("selected"), py::arg("relevant"));
    m.def("misclassification_error",
          [](const std::vector<int>& p, const std::vector<int>& t) { return misclassification_error(p, t); },
          py::arg("predicted"), py::arg("truth"));
}
