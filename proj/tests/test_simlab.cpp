#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "robsel/report.hpp"
#include "robsel/simlab.hpp"
#include "support.hpp"

using namespace robsel;
using testing::mean_cov;
using testing::rows_of;

namespace {

ContaminationSpec spec(int label_noise, int outliers, std::uint64_t seed) {
    ContaminationSpec cs;
    cs.n_label_noise = label_noise;
    cs.n_outliers = outliers;
    cs.seed = seed;
    return cs;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
}

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.replications = 3;
    c.n_train = 300;
    c.n_test = 400;
    c.classifier_starts = 3;
    c.tbic_starts = 5;
    c.ml_inits = 5;
    c.seed = 5;
    c.methods = {{"tbic", Selector::Tbic, 0.05, 3}, {"ml3-oracle", Selector::MlSubset, std::nullopt, 3},
                 {"all", Selector::None, 0.05, 3}};
    return c;
}

}  // namespace

TEST_CASE("generate_clean matches the design") {
    const DgpSpec dgp;
    const auto d = generate_clean(5000, dgp, 1);
    CHECK(d.rows() == 5000);
    CHECK(d.cols() == 16);
    CHECK(d.n_classes == 4);
    for (int g = 0; g < 4; ++g) {
        const double f = static_cast<double>(rows_of(d, g).size()) / 5000.0;
        CHECK(std::abs(f - dgp.tau[g]) < 3.0 * std::sqrt(dgp.tau[g] * (1 - dgp.tau[g]) / 5000.0));
    }
    const auto [m, s] = mean_cov(select_columns(d.x, relevant_columns()), rows_of(d, 0));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::abs(s(i, j) - std::pow(0.85, std::abs(i - j))) < 0.05);

    std::vector<int> all(5000);
    for (int i = 0; i < 5000; ++i) all[i] = i;
    const auto ols = testing::ols_oracle(d.x.col(3), select_columns(d.x, std::vector<int>{0, 2}), all);
    CHECK(std::abs(ols.beta[0] - 1.0) < 0.05);
    CHECK(std::abs(ols.beta[1]) < 0.05);

    const auto again = generate_clean(5000, dgp, 1);
    CHECK(again.x == d.x);
    CHECK(again.labels == d.labels);
    CHECK(d.feature_names.front() == "x1");
    CHECK(d.class_names.back() == "4");
}

TEST_CASE("DgpSpec validation") {
    DgpSpec bad;
    bad.tau = {0.5, 0.5, 0.5, -0.5};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    CHECK_THROWS_AS(generate_clean(0, {}, 1), ValidationError);
}

TEST_CASE("contaminate examples") {
    const auto d = generate_clean(500, {}, 2);
    const auto same = contaminate(d, spec(0, 0, 1));
    CHECK(same.data.x == d.x);
    CHECK(same.data.labels == d.labels);
    CHECK(same.planted.empty());
    CHECK(same.rate == 0.0);

    const auto c = contaminate(d, spec(30, 30, 3));
    CHECK(c.data.rows() == 530);
    CHECK(c.rate == doctest::Approx(60.0 / 530.0).epsilon(1e-15));
    CHECK(c.planted.size() == 60);
    CHECK(std::is_sorted(c.planted.begin(), c.planted.end()));

    // Relabeled rows are the last 30 rows of class 4.
    auto fourth = rows_of(d, 3);
    std::vector<int> last(fourth.end() - 30, fourth.end());
    auto relabeled = c.relabeled;
    std::sort(relabeled.begin(), relabeled.end());
    CHECK(relabeled == last);
    for (int r : last) CHECK(c.data.labels[r] == 2);
    for (int i = 0; i < 500; ++i) {
        CHECK(c.data.x.row(i) == d.x.row(i));
        if (std::find(last.begin(), last.end(), i) == last.end()) CHECK(c.data.labels[i] == d.labels[i]);
    }
}

TEST_CASE("planted outliers satisfy every distance constraint") {
    const DgpSpec dgp;
    const double q3 = testing::chi_square_quantile_oracle(3, 0.975), q4 = testing::chi_square_quantile_oracle(4, 0.975),
                 q9 = testing::chi_square_quantile_oracle(9, 0.975);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto c = contaminate(generate_clean(500, dgp, seed), spec(0, 20, seed));
        for (int r : c.outliers) {
            const Eigen::VectorXd x = c.data.x.row(r).transpose();
            for (int g = 0; g < 4; ++g) {
                const Eigen::Vector3d a = x.head(3) - dgp.mu[g];
                CHECK(a.dot(dgp.class_covariance(g).inverse() * a) > q3);
                const Eigen::Vector2d rel(dgp.mu[g][0], dgp.mu[g][2]);
                const Eigen::Vector4d b = x.segment(3, 4) - (rel.transpose() * dgp.B).transpose();
                CHECK(b.squaredNorm() > q4);
            }
            const Eigen::VectorXd e = x.tail(9) - dgp.eta;
            CHECK((e.array().square() / dgp.delta.array()).sum() > q9);
            CHECK(is_constrained_outlier(x, dgp, 0.975));
            CHECK(c.data.labels[r] >= 0);
            CHECK(c.data.labels[r] < 4);
        }
    }
}

TEST_CASE("contaminate errors") {
    const auto d = generate_clean(40, {}, 2);
    CHECK_THROWS_AS(contaminate(d, spec(1000, 0, 1)), ValidationError);
    auto tight = spec(0, 1, 1);
    tight.box_widening = -0.9;
    tight.max_draws = 100;
    CHECK_THROWS_AS(contaminate(d, tight), EstimationError);
}

TEST_CASE("metrics") {
    const std::vector<int> rel{0, 1, 2};
    CHECK(selection_precision(std::vector<int>{0, 1, 2}, rel) == 1.0);
    CHECK(selection_precision(std::vector<int>{0, 1, 2, 7}, rel) == 0.75);
    CHECK(selection_precision(std::vector<int>{8}, rel) == 0.0);
    CHECK(selection_precision(std::vector<int>{}, rel) == 0.0);
    const std::vector<int> t{0, 1, 2, 3};
    CHECK(misclassification_error(t, t) == 0.0);
    CHECK(misclassification_error(std::vector<int>{1, 2, 3, 0}, t) == 1.0);
    CHECK(misclassification_error(std::vector<int>{0, 1, 0, 0}, t) == 0.5);
    CHECK_THROWS_AS(misclassification_error(std::vector<int>{0}, t), ValidationError);
}

TEST_CASE("subset distances") {
    CHECK(hamming_distance(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}) == 0);
    CHECK(hamming_distance(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 5}) == 2);
    CHECK(normalized_edit_distance(std::vector<int>{2, 0, 1}, std::vector<int>{0, 1, 2}) == 0.0);
    CHECK(normalized_edit_distance(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2, 7}) == doctest::Approx(0.25));
    CHECK(normalized_edit_distance(std::vector<int>{}, std::vector<int>{}) == 0.0);
    CHECK(normalized_edit_distance(std::vector<int>{3}, std::vector<int>{4}) == 1.0);
}

TEST_CASE("run_experiment aggregates equal their records") {
    const auto cfg = small_config();
    const auto rep = run_experiment(cfg);
    const int m = static_cast<int>(cfg.methods.size());
    REQUIRE(rep.records.size() == static_cast<std::size_t>(cfg.replications * m));
    REQUIRE(rep.cells.size() == static_cast<std::size_t>(m));
    for (const auto& cell : rep.cells) {
        std::vector<double> prec, err;
        int exact = 0;
        for (const auto& r : rep.records) {
            if (r.method != cell.method || r.scenario != cell.scenario || !r.error.empty()) continue;
            prec.push_back(r.precision);
            if (r.test_error) err.push_back(*r.test_error);
            exact += r.exact;
        }
        double mp, sp;
        mean_sd(prec, mp, sp);
        CHECK(cell.n_ok == static_cast<int>(prec.size()));
        CHECK(cell.n_exact == exact);
        CHECK(cell.mean_precision == doctest::Approx(mp).epsilon(1e-14));
        CHECK(cell.sd_precision == doctest::Approx(sp).epsilon(1e-12));
        CHECK(cell.median_precision == median(prec));
        REQUIRE(cell.mean_error.has_value());
        double me, se;
        mean_sd(err, me, se);
        CHECK(*cell.mean_error == doctest::Approx(me).epsilon(1e-14));
        CHECK(*cell.sd_error == doctest::Approx(se).epsilon(1e-12));
    }
    CHECK(rep.cells[0].mean_precision == 1.0);
    CHECK(rep.cells[2].mean_precision == doctest::Approx(3.0 / 16.0));
    for (const auto& r : rep.records)
        if (r.method == 1) CHECK(r.gamma == doctest::Approx(25.0 / 305.0).epsilon(1e-15));
}

TEST_CASE("run_experiment is deterministic") {
    auto cfg = small_config();
    cfg.replications = 2;
    cfg.classify = false;
    auto a = experiment_json(run_experiment(cfg));
    CHECK(render(a) == render(experiment_json(run_experiment(cfg))));
    cfg.threads = 3;
    auto b = experiment_json(run_experiment(cfg));
    a.erase("config");
    b.erase("config");
    CHECK(render(a) == render(b));
}

TEST_CASE("without contamination the oracle level agrees with gamma 0") {
    ExperimentConfig cfg;
    cfg.replications = 3;
    cfg.n_train = 300;
    cfg.n_test = 100;
    cfg.classify = false;
    cfg.scenarios = {Scenario{0, 0}};
    cfg.methods = {{"tbic0", Selector::Tbic, 0.0, 3}, {"tbic-oracle", Selector::Tbic, std::nullopt, 3}};
    const auto rep = run_experiment(cfg);
    for (int r = 0; r < 3; ++r) CHECK(rep.records[2 * r].selected == rep.records[2 * r + 1].selected);
}

TEST_CASE("gamma_monitor") {
    GammaMonitorConfig cfg;
    cfg.grid = {0.05};
    const auto single = gamma_monitor(generate_clean(200, {}, 1), cfg);
    CHECK(single.distances.empty());
    CHECK(!single.first_unstable.has_value());

    cfg.grid = {0.1, 0.05, 0.0};
    int stable = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        cfg.seed = seed;
        const auto r = gamma_monitor(generate_clean(500, {}, seed), cfg);
        stable += std::all_of(r.distances.begin(), r.distances.end(), [](double x) { return x == 0.0; });
    }
    CHECK(stable >= 2);

    cfg.grid = {0.1, 0.075, 0.05, 0.025, 0.0};
    int flagged = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cfg.seed = seed;
        const auto c = contaminate(generate_clean(500, {}, derive_seed(seed, 0)), spec(20, 5, derive_seed(seed, 100)));
        const auto r = gamma_monitor(c.data, cfg);
        CHECK(r.distances.size() == 4);
        flagged += r.first_unstable.has_value() && cfg.grid[*r.first_unstable] <= c.rate;
    }
    CHECK(flagged >= 3);

    cfg.grid = {0.0, 0.1};
    CHECK_THROWS_AS(gamma_monitor(generate_clean(100, {}, 1), cfg), ValidationError);
}

TEST_CASE("experiment config round trip") {
    const auto cfg = small_config();
    const auto j = experiment_config_json(cfg);
    CHECK(experiment_config_json(experiment_config_from_json(j)) == j);
    Json bad = j;
    bad["replicatons"] = 3;
    CHECK_THROWS_AS(experiment_config_from_json(bad), ValidationError);
}
