#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "robsel/ml_subset.hpp"
#include "robsel/redda.hpp"
#include "robsel/simlab.hpp"
#include "support.hpp"

using namespace robsel;
using testing::gaussian_classes;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

Eigen::MatrixXd restrict(const Eigen::MatrixXd& s, const std::vector<int>& a, const std::vector<int>& b) {
    Eigen::MatrixXd out(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out(i, j) = s(a[i], b[j]);
    return out;
}

Eigen::VectorXd restrict(const Eigen::VectorXd& v, const std::vector<int>& a) {
    Eigen::VectorXd out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = v[a[i]];
    return out;
}

double h_oracle(const ClassParams& p, const std::vector<int>& f) {
    double h = -std::log(restrict(*p.pooled_sigma, f, f).determinant());
    for (int g = 0; g < p.n_classes(); ++g) h += p.tau[g] * std::log(restrict(p.sigma[g], f, f).determinant());
    return h;
}

double joint_oracle(const LabeledDataset& d, const SubsetPartition& part, const ClassParams& p, const ConditionalLink& l,
                    const TrimmingState& keep) {
    const auto& f = part.relevant;
    const auto& e = part.irrelevant;
    double s = 0.0;
    for (int i = 0; i < d.rows(); ++i) {
        if (!keep.kept(i)) continue;
        const int g = d.labels[i];
        const Eigen::VectorXd x = d.x.row(i).transpose();
        s += std::log(p.tau[g]) + testing::logpdf_oracle(restrict(x, f), restrict(p.mu[g], f), restrict(p.sigma[g], f, f));
        if (!e.empty()) s += testing::logpdf_oracle(restrict(x, e) - l.coef * restrict(x, f), l.mean, l.covariance);
    }
    return s;
}

template <class F>
void for_each_subset(int n, int k, F&& fn) {
    std::vector<int> c(k);
    for (int i = 0; i < k; ++i) c[i] = i;
    while (true) {
        fn(c);
        int i = k - 1;
        while (i >= 0 && c[i] == n - k + i) --i;
        if (i < 0) return;
        ++c[i];
        for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
    }
}

std::vector<int> exhaustive_min(const ClassParams& p, int n, int k, double* value = nullptr) {
    std::vector<int> best;
    double bv = 1e300;
    for_each_subset(n, k, [&](const std::vector<int>& c) {
        const double v = h_oracle(p, c);
        if (v < bv) {
            bv = v;
            best = c;
        }
    });
    if (value) *value = bv;
    return best;
}

MlSubsetOptions opts(double gamma, std::uint64_t seed, int n_init = 10) {
    MlSubsetOptions o;
    o.gamma = gamma;
    o.seed = seed;
    o.n_init = n_init;
    return o;
}

Contaminated benchmark(std::uint64_t seed) {
    ContaminationSpec cs;
    cs.n_label_noise = 20;
    cs.n_outliers = 5;
    cs.seed = derive_seed(seed, 100);
    return contaminate(generate_clean(500, {}, derive_seed(seed, 0)), cs);
}

}  // namespace

TEST_CASE("subset partitions") {
    const auto p = SubsetPartition::from_relevant({4, 1}, 6);
    CHECK(p.relevant == std::vector<int>{1, 4});
    CHECK(p.irrelevant == std::vector<int>{0, 2, 3, 5});
    CHECK_THROWS_AS(SubsetPartition::from_relevant({1, 1}, 6), ValidationError);
    CHECK_THROWS_AS(SubsetPartition::from_relevant({6}, 6), ValidationError);
    CHECK(n_choose_k(16, 3) == 560);
    CHECK(n_choose_k(12, 0) == 1);
    CHECK(n_choose_k(1000, 500) == INT64_MAX);
    for (auto s : {SubsetSearch::Auto, SubsetSearch::Exhaustive, SubsetSearch::Genetic, SubsetSearch::ClosedForm})
        CHECK(parse_subset_search(to_string(s)) == s);
}

TEST_CASE("joint_trimmed_loglik examples") {
    const auto d = gaussian_classes(20, 4, 2, 3);
    const auto keep = TrimmingState::from_kept(40, std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17,
                                                                     20, 21, 22, 23, 24, 25, 26, 27, 28, 29, 30, 31, 32, 33,
                                                                     34, 35, 36, 37},
                                               0.1);
    const auto par = m_step(d, keep, CovarianceModel::VVV);

    const auto whole = SubsetPartition::from_relevant({0, 1, 2, 3}, 4);
    const auto link0 = conditional_link(par, whole);
    CHECK(link0.coef.rows() == 0);
    CHECK(joint_trimmed_loglik(d, whole, par, link0, keep) == doctest::Approx(trimmed_loglik(par, d, keep)).epsilon(1e-13));

    const auto part = SubsetPartition::from_relevant({1, 3}, 4);
    const auto link = conditional_link(par, part);
    CHECK(joint_trimmed_loglik(d, part, par, link, keep) == doctest::Approx(joint_oracle(d, part, par, link, keep)).epsilon(1e-11));

    LabeledDataset one;
    one.x.resize(1, 3);
    one.x << 1.0, 2.0, 0.5 * 1.0 + 4.0;
    one.labels = {0};
    one.n_classes = 2;
    ClassParams q;
    q.tau = Eigen::Vector2d(0.3, 0.7);
    q.mu = {Eigen::Vector3d(1.0, 2.0, 0.0), Eigen::Vector3d::Zero()};
    q.sigma = {Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(3, 3)};
    ConditionalLink l;
    l.coef = Eigen::MatrixXd(1, 2);
    l.coef << 0.5, 0.0;
    l.mean = Eigen::VectorXd::Constant(1, 4.0);
    l.covariance = Eigen::MatrixXd::Identity(1, 1);
    const auto p2 = SubsetPartition::from_relevant({0, 1}, 3);
    CHECK(joint_trimmed_loglik(one, p2, q, l, TrimmingState::all(1)) ==
          doctest::Approx(-1.5 * kLog2Pi + std::log(0.3)).epsilon(1e-14));
}

TEST_CASE("robust_init branches") {
    const auto big = generate_clean(500, {}, 1);
    const auto a = robust_init(big, 3, 0.05, 9);
    CHECK(a.large_sample);
    CHECK(a.keep.n_kept() == 68);
    CHECK(!a.relevant.has_value());
    CHECK(robust_init(big, 3, 0.05, 9).keep == a.keep);

    const auto small = generate_clean(100, {}, 2);
    const auto b = robust_init(small, 3, 0.0, 4);
    CHECK(!b.large_sample);
    REQUIRE(b.relevant.has_value());
    CHECK(b.relevant->size() == 3);
    CHECK(b.keep.n_kept() == 100);
    const auto c = robust_init(small, 3, 0.1, 4);
    CHECK(c.keep.n_discarded() == 10);
    CHECK(robust_init(small, 3, 0.1, 4).keep == c.keep);

    auto tiny = gaussian_classes(10, 5, 2, 1);
    tiny.labels[0] = 1;
    for (int i = 1; i < 10; ++i) tiny.labels[i] = 1;
    tiny.labels[0] = 0;
    CHECK_THROWS_AS(robust_init(tiny, 3, 0.0, 1), EstimationError);
}

TEST_CASE("m_step examples") {
    const auto d1 = gaussian_classes(50, 3, 1, 5);
    const auto p1 = m_step(d1, TrimmingState::all(50), CovarianceModel::VVV);
    CHECK(max_abs(*p1.pooled_sigma - p1.sigma[0]) < 1e-12);
    CHECK(max_abs(*p1.pooled_mu - p1.mu[0]) < 1e-12);

    for (double m : {0.5, 2.0, 5.0}) {
        LabeledDataset d;
        d.x.resize(8, 1);
        d.x << -m + 1, -m - 1, -m + 1, -m - 1, m + 1, m - 1, m + 1, m - 1;
        d.labels = {0, 0, 0, 0, 1, 1, 1, 1};
        d.n_classes = 2;
        const auto p = m_step(d, TrimmingState::all(8), CovarianceModel::VVV);
        CHECK((*p.pooled_sigma)(0, 0) == doctest::Approx(1.0 + m * m).epsilon(1e-13));
        CHECK(p.sigma[0](0, 0) == doctest::Approx(1.0).epsilon(1e-13));
    }

    const auto d3 = gaussian_classes(13, 2, 3, 6);
    const auto p3 = m_step(d3, TrimmingState::from_kept(39, std::vector<int>{0, 1, 2, 3, 13, 14, 15, 26, 27, 28, 29, 30}, 0.5),
                           CovarianceModel::EEE);
    CHECK(p3.tau.sum() == 1.0);
}

TEST_CASE("h_objective examples") {
    const auto d1 = gaussian_classes(40, 5, 1, 8);
    const auto p1 = m_step(d1, TrimmingState::all(40), CovarianceModel::VVV);
    for_each_subset(5, 2, [&](const std::vector<int>& f) { CHECK(std::abs(h_objective(p1, f)) < 1e-12); });

    const auto d = gaussian_classes(30, 5, 3, 9);
    auto p = m_step(d, TrimmingState::all(90), CovarianceModel::VVV);
    for (auto& s : p.sigma) s = *p.pooled_sigma;
    for_each_subset(5, 3, [&](const std::vector<int>& f) { CHECK(std::abs(h_objective(p, f)) < 1e-12); });
}

TEST_CASE("h_objective is minimized by the relevant variables of the benchmark") {
    const auto d = generate_clean(2000, {}, 11);
    const auto p = m_step(d, TrimmingState::all(2000), CovarianceModel::VVV);
    double best = 0.0;
    const auto arg = exhaustive_min(p, 16, 3, &best);
    CHECK(arg == relevant_columns());
    for_each_subset(16, 3, [&](const std::vector<int>& f) {
        CHECK(h_objective(p, f) == doctest::Approx(h_oracle(p, f)).epsilon(1e-10));
    });
}

TEST_CASE("s_step examples") {
    ClassParams p;
    p.tau = Eigen::Vector2d(0.4, 0.6);
    Eigen::VectorXd v0 = Eigen::VectorXd::Constant(6, 0.9), v1 = Eigen::VectorXd::Constant(6, 0.8);
    v0[1] = v0[4] = 0.1;
    v1[1] = 0.2;
    v1[4] = 0.15;
    p.sigma = {Eigen::MatrixXd(v0.asDiagonal()), Eigen::MatrixXd(v1.asDiagonal())};
    p.mu = {Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(6)};
    p.pooled_mu = Eigen::VectorXd::Zero(6);
    p.pooled_sigma = Eigen::MatrixXd::Identity(6, 6);
    const auto scores = diagonal_relevance_scores(p);
    for (int k = 0; k < 6; ++k)
        CHECK(scores[k] == doctest::Approx(0.4 * std::log(v0[k]) + 0.6 * std::log(v1[k])).epsilon(1e-14));
    const auto r = s_step(p, 2, CovarianceModel::VVI, SubsetSearch::Auto, {}, 1);
    CHECK(r.relevant == std::vector<int>{1, 4});
    CHECK(r.method == SubsetSearch::ClosedForm);
    CHECK(s_step(p, 2, CovarianceModel::VVI, SubsetSearch::Exhaustive, {}, 1).relevant == std::vector<int>{1, 4});

    CHECK(s_step(p, 6, CovarianceModel::VVV, SubsetSearch::Auto, {}, 1).relevant == std::vector<int>{0, 1, 2, 3, 4, 5});
    CHECK_THROWS_AS(s_step(p, 2, CovarianceModel::VVV, SubsetSearch::ClosedForm, {}, 1), ValidationError);
}

TEST_CASE("diagonal closed forms agree with exhaustive search") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (auto m : {CovarianceModel::VVI, CovarianceModel::EEI}) {
            const int nv = 6 + static_cast<int>(seed % 7);
            const auto d = gaussian_classes(30, nv, 3, seed, 0.7);
            const auto p = m_step(d, TrimmingState::all(90), m);
            for (int k : {2, 3}) {
                const auto cf = s_step(p, k, m, SubsetSearch::ClosedForm, {}, seed);
                CHECK(cf.relevant == exhaustive_min(p, nv, k));
            }
        }
    }
}

TEST_CASE("genetic search finds the exhaustive minimum on small fixtures") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto d = gaussian_classes(40, 10, 3, 300 + seed, 0.5);
        const auto p = m_step(d, TrimmingState::all(120), CovarianceModel::VVV);
        double ex = 0.0;
        const auto e = exhaustive_min(p, 10, 3, &ex);
        const auto ga = s_step(p, 3, CovarianceModel::VVV, SubsetSearch::Genetic, {}, seed);
        CHECK(ga.value >= ex - 1e-9);
        hits += ga.relevant == e;
    }
    CHECK(hits >= 9);
}

TEST_CASE("t_step examples") {
    ClassParams p;
    p.tau = Eigen::VectorXd::Ones(1);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(4, 4);
    s.topLeftCorner(2, 2) << 2.0, 0.3, 0.3, 1.0;
    s.bottomRightCorner(2, 2) << 1.5, -0.2, -0.2, 0.7;
    p.pooled_sigma = s;
    p.pooled_mu = Eigen::Vector4d(1, 2, 3, 4);
    p.mu = {*p.pooled_mu};
    p.sigma = {s};
    const auto l = conditional_link(p, SubsetPartition::from_relevant({0, 1}, 4));
    CHECK(max_abs(l.coef) < 1e-15);
    CHECK(max_abs(l.mean - Eigen::Vector2d(3, 4)) < 1e-14);
    CHECK(max_abs(l.covariance - s.bottomRightCorner(2, 2)) < 1e-14);

    const double rho = 0.6;
    ClassParams b;
    b.tau = Eigen::VectorXd::Ones(1);
    b.pooled_sigma = (Eigen::Matrix2d() << 1.0, rho, rho, 1.0).finished();
    b.pooled_mu = Eigen::Vector2d::Zero();
    b.mu = {*b.pooled_mu};
    b.sigma = {*b.pooled_sigma};
    const auto lb = conditional_link(b, SubsetPartition::from_relevant({0}, 2));
    CHECK(lb.coef(0, 0) == doctest::Approx(rho).epsilon(1e-14));
    CHECK(lb.covariance(0, 0) == doctest::Approx(1.0 - rho * rho).epsilon(1e-14));

    const auto d = gaussian_classes(20, 4, 2, 12);
    const auto pm = m_step(d, TrimmingState::all(40), CovarianceModel::VVV);
    CHECK(t_step(d, pm, std::vector<int>{0, 2}, 0.0).keep == TrimmingState::all(40));
    const auto t = t_step(d, pm, std::vector<int>{0, 2}, 0.1);
    CHECK(t.keep.n_discarded() == 4);
}

TEST_CASE("conditioning is consistent with the joint density") {
    Rng rng(21);
    for (int rep = 0; rep < 10; ++rep) {
        ClassParams p;
        p.tau = Eigen::VectorXd::Ones(1);
        p.pooled_sigma = testing::random_spd(5, rng);
        p.pooled_mu = Eigen::VectorXd::Random(5);
        p.mu = {*p.pooled_mu};
        p.sigma = {*p.pooled_sigma};
        const auto part = SubsetPartition::from_relevant({0, 3}, 5);
        const auto l = conditional_link(p, part);
        const Eigen::VectorXd x = Eigen::VectorXd::Random(5) * 2.0;
        const Eigen::VectorXd xf = restrict(x, part.relevant), xe = restrict(x, part.irrelevant);
        const double joint = gaussian_logpdf(x, *p.pooled_mu, *p.pooled_sigma);
        const double split =
            gaussian_logpdf(xf, restrict(*p.pooled_mu, part.relevant), restrict(*p.pooled_sigma, part.relevant, part.relevant)) +
            gaussian_logpdf(xe - l.coef * xf, l.mean, l.covariance);
        CHECK(std::abs(joint - split) < 1e-8);
    }
}

TEST_CASE("singular conditional covariance uses the g-inverse density") {
    const auto d0 = gaussian_classes(30, 3, 2, 14);
    LabeledDataset d = d0;
    d.x.conservativeResize(Eigen::NoChange, 4);
    d.x.col(3) = 2.0 * d.x.col(0) - d.x.col(1);
    const auto p = m_step(d, TrimmingState::all(60), CovarianceModel::VVV);
    const auto part = SubsetPartition::from_relevant({0, 2}, 4);
    const auto l = conditional_link(p, part);
    const auto v = joint_row_loglik(d, part, p, l);
    for (double x : v) CHECK(std::isfinite(x));
}

TEST_CASE("fit_ml_subset on the contaminated benchmark") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto c = benchmark(seed);
        const auto fit = fit_ml_subset(c.data, 3, opts(0.05, seed));
        CHECK(fit.partition.relevant == relevant_columns());
        CHECK(fit.trimming.n_discarded() == trimmed_count(c.data.rows(), 0.05));
        const double recomputed = joint_trimmed_loglik(c.data, fit.partition, fit.params, fit.link, fit.trimming);
        CHECK(std::abs(fit.objective - recomputed) < 1e-8);
        for (std::size_t k = 1; k < fit.objective_trace.size(); ++k)
            CHECK(fit.objective_trace[k] >= fit.objective_trace[k - 1] - 1e-8);
        CHECK(std::abs(fit.params.tau.sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("fit_ml_subset is deterministic") {
    const auto c = benchmark(4);
    auto o = opts(0.05, 99, 6);
    const auto a = fit_ml_subset(c.data, 4, o);
    o.threads = 3;
    const auto b = fit_ml_subset(c.data, 4, o);
    CHECK(a.partition.relevant == b.partition.relevant);
    CHECK(a.trimming == b.trimming);
    CHECK(a.objective == b.objective);
}

TEST_CASE("fit_ml_subset with p = P matches fit_redda") {
    auto d = gaussian_classes(60, 3, 2, 15, 2.0);
    d.x.conservativeResize(123, Eigen::NoChange);
    for (int i = 0; i < 3; ++i) {
        d.x.row(120 + i) = Eigen::RowVector3d::Constant(40.0 + 10.0 * i);
        d.labels.push_back(i % 2);
    }
    const double gamma = 3.0 / 123.0 + 1e-6;
    const auto ml = fit_ml_subset(d, 3, opts(gamma, 1));
    ReddaOptions ro;
    ro.gamma = gamma;
    ro.seed = 1;
    ro.n_start = 10;
    const auto rd = fit_redda(d, ro);
    CHECK(ml.partition.relevant == std::vector<int>{0, 1, 2});
    CHECK(ml.trimming == rd.trimming);
    CHECK(std::abs(ml.objective - rd.trimmed_loglik) < 1e-6);
}

TEST_CASE("fit_ml_subset fails when every initialization fails") {
    auto d = gaussian_classes(10, 5, 2, 1);
    for (int i = 1; i < 20; ++i) d.labels[i] = 1;
    d.labels[0] = 0;
    CHECK_THROWS_AS(fit_ml_subset(d, 3, opts(0.0, 1, 3)), EstimationError);
    CHECK_THROWS_AS(fit_ml_subset(d, 6, opts(0.0, 1, 3)), ValidationError);
}
