#include "robsel/model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

namespace robsel {
namespace {

constexpr std::array kModels{CovarianceModel::EII, CovarianceModel::VII, CovarianceModel::EEI,
                             CovarianceModel::VEI, CovarianceModel::EVI, CovarianceModel::VVI,
                             CovarianceModel::EEE, CovarianceModel::VVV};

constexpr double kAbsFloor = 1e-10;
constexpr double kRelFloor = 1e-8;
constexpr double kLog2Pi = 1.8378770664093454836;

bool is_symmetric(const Eigen::MatrixXd& m, double tol) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

double eigen_floor(double largest) { return std::max(kAbsFloor, kRelFloor * largest); }

Eigen::VectorXd floor_diagonal(Eigen::VectorXd d) {
    const double f = eigen_floor(d.maxCoeff());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = std::max(d[i], f);
    return d;
}

struct ClassScatter {
    std::vector<int> counts;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> scatter;  // W_g = sum of centered outer products
    int total = 0;
};

ClassScatter class_scatter(const Eigen::MatrixXd& x, std::span<const int> labels, int n_classes,
                           const TrimmingState& keep) {
    if (static_cast<Eigen::Index>(labels.size()) != x.rows() || keep.size() != x.rows()) {
        throw ValidationError("data, labels and trimming state have inconsistent lengths");
    }
    const auto d = x.cols();
    ClassScatter s;
    s.counts.assign(static_cast<std::size_t>(n_classes), 0);
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(n_classes));
    for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
        if (!keep.kept(i)) continue;
        rows[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
    }
    for (int g = 0; g < n_classes; ++g) {
        const auto& r = rows[static_cast<std::size_t>(g)];
        const int n_g = static_cast<int>(r.size());
        if (n_g == 0) throw EstimationError("class " + std::to_string(g + 1) + " has no kept rows");
        if (n_g < 2) throw EstimationError("class " + std::to_string(g + 1) + " has fewer than 2 kept rows");
        Eigen::MatrixXd block(n_g, d);
        for (int k = 0; k < n_g; ++k) block.row(k) = x.row(r[static_cast<std::size_t>(k)]);
        Eigen::VectorXd mean = block.colwise().mean().transpose();
        block.rowwise() -= mean.transpose();
        s.counts[static_cast<std::size_t>(g)] = n_g;
        s.means.push_back(std::move(mean));
        s.scatter.push_back(block.transpose() * block);
        s.total += n_g;
    }
    return s;
}

// VEI: Sigma_g = lambda_g * A, A diagonal with unit determinant, by alternating
// the two conditional maximizers.
std::vector<Eigen::MatrixXd> fit_vei(const ClassScatter& s, int d) {
    const auto n_classes = s.scatter.size();
    std::vector<Eigen::VectorXd> diag_w;
    for (const auto& w : s.scatter) diag_w.push_back(floor_diagonal(w.diagonal()));
    std::vector<double> lambda(n_classes);
    for (std::size_t g = 0; g < n_classes; ++g) lambda[g] = diag_w[g].sum() / (d * s.counts[g]);
    Eigen::VectorXd shape = Eigen::VectorXd::Ones(d);
    for (int iter = 0; iter < 100; ++iter) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
        for (std::size_t g = 0; g < n_classes; ++g) acc += diag_w[g] / lambda[g];
        shape = acc / std::exp(acc.array().log().mean());
        double change = 0.0;
        for (std::size_t g = 0; g < n_classes; ++g) {
            const double next = (diag_w[g].array() / shape.array()).sum() / (d * s.counts[g]);
            change = std::max(change, std::abs(next - lambda[g]) / std::max(lambda[g], 1e-300));
            lambda[g] = next;
        }
        if (change < 1e-8) break;
    }
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t g = 0; g < n_classes; ++g) out.emplace_back((lambda[g] * shape).asDiagonal());
    return out;
}

// EVI: Sigma_g = lambda * A_g; closed form, A_g = diag(W_g) / |diag(W_g)|^(1/d).
std::vector<Eigen::MatrixXd> fit_evi(const ClassScatter& s, int d) {
    std::vector<Eigen::VectorXd> shapes;
    double lambda = 0.0;
    for (const auto& w : s.scatter) {
        const Eigen::VectorXd dw = floor_diagonal(w.diagonal());
        const double root = std::exp(dw.array().log().mean());
        shapes.push_back(dw / root);
        lambda += root;
    }
    lambda /= s.total;
    std::vector<Eigen::MatrixXd> out;
    for (const auto& a : shapes) out.emplace_back((lambda * a).asDiagonal());
    (void)d;
    return out;
}

}  // namespace

std::string_view to_string(CovarianceModel model) {
    switch (model) {
        case CovarianceModel::EII: return "EII";
        case CovarianceModel::VII: return "VII";
        case CovarianceModel::EEI: return "EEI";
        case CovarianceModel::VEI: return "VEI";
        case CovarianceModel::EVI: return "EVI";
        case CovarianceModel::VVI: return "VVI";
        case CovarianceModel::EEE: return "EEE";
        case CovarianceModel::VVV: return "VVV";
    }
    return "?";
}

CovarianceModel parse_covariance_model(std::string_view code) {
    std::string upper(code);
    for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (auto m : kModels)
        if (to_string(m) == upper) return m;
    throw ValidationError("unsupported covariance model '" + std::string(code) +
                          "' (expected one of EII, VII, EEI, VEI, EVI, VVI, EEE, VVV)");
}

std::span<const CovarianceModel> all_covariance_models() { return kModels; }

CovarianceFamily family(CovarianceModel model) {
    switch (model) {
        case CovarianceModel::EII:
        case CovarianceModel::VII: return CovarianceFamily::Spherical;
        case CovarianceModel::EEI:
        case CovarianceModel::VEI:
        case CovarianceModel::EVI:
        case CovarianceModel::VVI: return CovarianceFamily::Diagonal;
        default: return CovarianceFamily::Ellipsoidal;
    }
}

int covariance_parameter_count(CovarianceModel model, int dim, int n_classes) {
    const int d = dim, g = n_classes;
    switch (model) {
        case CovarianceModel::EII: return 1;
        case CovarianceModel::VII: return g;
        case CovarianceModel::EEI: return d;
        case CovarianceModel::VEI: return g + (d - 1);
        case CovarianceModel::EVI: return 1 + g * (d - 1);
        case CovarianceModel::VVI: return g * d;
        case CovarianceModel::EEE: return d * (d + 1) / 2;
        case CovarianceModel::VVV: return g * d * (d + 1) / 2;
    }
    return 0;
}

int parameter_count(CovarianceModel model, int dim, int n_classes) {
    return (n_classes - 1) + n_classes * dim + covariance_parameter_count(model, dim, n_classes);
}

Eigen::MatrixXd EigenDecomposition::recompose() const {
    return volume * orientation * shape.asDiagonal() * orientation.transpose();
}

EigenDecomposition decompose_covariance(const Eigen::MatrixXd& sigma) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0) throw ValidationError("covariance must be square and non-empty");
    if (!is_symmetric(sigma, 1e-10)) throw ValidationError("covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    if (eig.info() != Eigen::Success) throw EstimationError("eigen-decomposition failed");
    const Eigen::Index p = sigma.rows();
    // Decreasing eigenvalue order; ties keep the solver's order.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return eig.eigenvalues()[a] > eig.eigenvalues()[b]; });
    Eigen::VectorXd values(p);
    Eigen::MatrixXd vectors(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        values[j] = eig.eigenvalues()[order[static_cast<std::size_t>(j)]];
        vectors.col(j) = eig.eigenvectors().col(order[static_cast<std::size_t>(j)]);
    }
    const double largest = values.cwiseAbs().maxCoeff();
    if (largest == 0.0) throw EstimationError("degenerate covariance: zero matrix");
    if (values.minCoeff() < -1e-10 * largest) throw ValidationError("covariance has negative eigenvalues");
    if (values.minCoeff() <= 1e-14 * largest) throw EstimationError("degenerate covariance: singular matrix");
    for (Eigen::Index j = 0; j < p; ++j) {
        Eigen::Index arg = 0;
        vectors.col(j).cwiseAbs().maxCoeff(&arg);
        if (vectors(arg, j) < 0) vectors.col(j) *= -1.0;
    }
    EigenDecomposition out;
    const double log_volume = values.array().log().mean();
    out.volume = std::exp(log_volume);
    out.shape = (values.array().log() - log_volume).exp().matrix();
    out.orientation = std::move(vectors);
    return out;
}

Eigen::MatrixXd regularize_covariance(const Eigen::MatrixXd& sigma) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    const Eigen::VectorXd& values = eig.eigenvalues();
    const double f = eigen_floor(values.maxCoeff());
    if (values.minCoeff() >= f) return sigma;
    const Eigen::VectorXd floored = values.cwiseMax(f);
    Eigen::MatrixXd out = eig.eigenvectors() * floored.asDiagonal() * eig.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

ClassParams estimate_class_params(const LabeledDataset& data, const TrimmingState& keep, CovarianceModel model) {
    return estimate_class_params(data.x, data.labels, data.n_classes, keep, model);
}

ClassParams estimate_class_params(const Eigen::MatrixXd& x, std::span<const int> labels, int n_classes,
                                  const TrimmingState& keep, CovarianceModel model) {
    const ClassScatter s = class_scatter(x, labels, n_classes, keep);
    const int d = static_cast<int>(x.cols());
    const auto G = static_cast<std::size_t>(n_classes);

    ClassParams params;
    params.tau.resize(n_classes);
    for (std::size_t g = 0; g < G; ++g) params.tau[static_cast<Eigen::Index>(g)] = static_cast<double>(s.counts[g]) / s.total;
    params.mu = s.means;

    Eigen::MatrixXd within = Eigen::MatrixXd::Zero(d, d);
    for (const auto& w : s.scatter) within += w;

    auto& sig = params.sigma;
    switch (model) {
        case CovarianceModel::EII: {
            const double lambda = std::max(within.trace() / (static_cast<double>(s.total) * d), kAbsFloor);
            sig.assign(G, lambda * Eigen::MatrixXd::Identity(d, d));
            break;
        }
        case CovarianceModel::VII:
            for (std::size_t g = 0; g < G; ++g) {
                const double lambda = std::max(s.scatter[g].trace() / (static_cast<double>(s.counts[g]) * d), kAbsFloor);
                sig.push_back(lambda * Eigen::MatrixXd::Identity(d, d));
            }
            break;
        case CovarianceModel::EEI:
            sig.assign(G, Eigen::MatrixXd(floor_diagonal(within.diagonal() / s.total).asDiagonal()));
            break;
        case CovarianceModel::VVI:
            for (std::size_t g = 0; g < G; ++g)
                sig.emplace_back(floor_diagonal(s.scatter[g].diagonal() / s.counts[g]).asDiagonal());
            break;
        case CovarianceModel::VEI: sig = fit_vei(s, d); break;
        case CovarianceModel::EVI: sig = fit_evi(s, d); break;
        case CovarianceModel::EEE: sig.assign(G, regularize_covariance(within / s.total)); break;
        case CovarianceModel::VVV:
            for (std::size_t g = 0; g < G; ++g) sig.push_back(regularize_covariance(s.scatter[g] / s.counts[g]));
            break;
    }
    if (family(model) == CovarianceFamily::Diagonal) {
        for (auto& m : sig) m = Eigen::MatrixXd(floor_diagonal(m.diagonal()).asDiagonal());
    }
    return params;
}

Eigen::VectorXd pooled_mean(const Eigen::MatrixXd& x, const TrimmingState& keep) {
    if (keep.size() != x.rows()) throw ValidationError("trimming state length does not match data");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.cols());
    int n = 0;
    for (int i = 0; i < keep.size(); ++i) {
        if (!keep.kept(i)) continue;
        sum += x.row(i).transpose();
        ++n;
    }
    if (n == 0) throw EstimationError("no kept rows for pooled estimates");
    return sum / n;
}

Eigen::MatrixXd pooled_covariance(const Eigen::MatrixXd& x, const TrimmingState& keep, CovarianceModel model) {
    const Eigen::VectorXd mean = pooled_mean(x, keep);
    const std::vector<int> rows = keep.kept_rows();
    Eigen::MatrixXd centered(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t k = 0; k < rows.size(); ++k)
        centered.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]) - mean.transpose();
    Eigen::MatrixXd ell = centered.transpose() * centered / static_cast<double>(rows.size());
    switch (family(model)) {
        case CovarianceFamily::Ellipsoidal: return ell;
        case CovarianceFamily::Diagonal: return Eigen::MatrixXd(ell.diagonal().asDiagonal());
        case CovarianceFamily::Spherical:
            return ell.diagonal().mean() * Eigen::MatrixXd::Identity(x.cols(), x.cols());
    }
    return ell;
}

double log_det(const Eigen::MatrixXd& sigma, bool* floored) {
    if (floored) *floored = false;
    if (sigma.size() == 0) return 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() == Eigen::Success) {
        const Eigen::VectorXd d = llt.matrixLLT().diagonal();
        if (d.minCoeff() > 0.0) return 2.0 * d.array().log().sum();
    }
    if (floored) *floored = true;
    const Eigen::VectorXd values = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma, Eigen::EigenvaluesOnly).eigenvalues();
    return values.cwiseMax(eigen_floor(values.maxCoeff())).array().log().sum();
}

GaussianDensity::GaussianDensity(Eigen::VectorXd mean, const Eigen::MatrixXd& sigma) : mean_(std::move(mean)) {
    const Eigen::Index d = mean_.size();
    if (sigma.rows() != d || sigma.cols() != d) {
        throw ValidationError("covariance is " + std::to_string(sigma.rows()) + "x" + std::to_string(sigma.cols()) +
                              " but mean has length " + std::to_string(d));
    }
    if (d == 0) return;
    if (!is_symmetric(sigma, 1e-8)) throw ValidationError("covariance is not symmetric");

    const double scale = sigma.diagonal().cwiseAbs().maxCoeff();
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() == Eigen::Success) {
        const Eigen::VectorXd pivots = llt.matrixLLT().diagonal();
        if (pivots.minCoeff() > 0.0 && pivots.cwiseAbs2().minCoeff() > 1e-10 * scale) {
            whitening_ = llt.matrixL().solve(Eigen::MatrixXd::Identity(d, d));
            log_det_ = 2.0 * pivots.array().log().sum();
            rank_ = static_cast<int>(d);
            return;
        }
    }
    // Singular: g-inverse restricted to the eigenvectors with nonzero eigenvalues.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    const Eigen::VectorXd& values = eig.eigenvalues();
    const double tol = 1e-10 * std::max(values.maxCoeff(), 0.0);
    singular_ = true;
    std::vector<Eigen::Index> nonzero;
    for (Eigen::Index k = 0; k < d; ++k)
        if (values[k] > tol && values[k] > 0.0) nonzero.push_back(k);
    rank_ = static_cast<int>(nonzero.size());
    whitening_.resize(rank_, d);
    log_det_ = 0.0;
    for (int k = 0; k < rank_; ++k) {
        const double w = values[nonzero[static_cast<std::size_t>(k)]];
        whitening_.row(k) = eig.eigenvectors().col(nonzero[static_cast<std::size_t>(k)]).transpose() / std::sqrt(w);
        log_det_ += std::log(w);
    }
}

double GaussianDensity::log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != mean_.size()) {
        throw ValidationError("point has dimension " + std::to_string(x.size()) + ", density has " +
                              std::to_string(mean_.size()));
    }
    if (rank_ == 0) return 0.0;
    const double q = (whitening_ * (x - mean_)).squaredNorm();
    return -0.5 * (rank_ * kLog2Pi + log_det_ + q);
}

Eigen::VectorXd GaussianDensity::log_density_rows(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    if (x.cols() != mean_.size()) {
        throw ValidationError("data has " + std::to_string(x.cols()) + " columns, density has dimension " +
                              std::to_string(mean_.size()));
    }
    if (rank_ == 0) return Eigen::VectorXd::Zero(x.rows());
    const Eigen::MatrixXd z = whitening_ * (x.rowwise() - mean_.transpose()).transpose();
    const Eigen::VectorXd q = z.colwise().squaredNorm().transpose();
    return (-0.5 * (q.array() + rank_ * kLog2Pi + log_det_)).matrix();
}

double gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
    if (x.size() != mu.size()) throw ValidationError("point and mean dimensions differ");
    return GaussianDensity(mu, sigma).log_density(x);
}

double chi_square_quantile(int df, double prob) {
    if (df <= 0) throw ValidationError("chi-square degrees of freedom must be positive");
    if (!(prob > 0.0 && prob < 1.0)) throw ValidationError("probability must lie strictly between 0 and 1");
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(df), prob);
}

double squared_mahalanobis(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw EstimationError("covariance is not positive definite");
    return llt.matrixL().solve(x - mu).squaredNorm();
}

}  // namespace robsel
