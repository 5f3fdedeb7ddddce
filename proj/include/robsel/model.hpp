#pragma once

// Patterned Gaussian family: covariance models of the form
// Sigma_g = lambda_g * D_g * A_g * D_g', constrained M-steps, pooled
// covariances and density evaluation shared by every estimator.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "robsel/common.hpp"

namespace robsel {

/// Three-letter volume/shape/orientation code. Only codes with closed-form
/// (or simple fixed-point) M-steps are supported.
enum class CovarianceModel { EII, VII, EEI, VEI, EVI, VVI, EEE, VVV };

enum class CovarianceFamily { Spherical, Diagonal, Ellipsoidal };

std::string_view to_string(CovarianceModel model);
/// Accepts the code case-insensitively; throws ValidationError on unknown codes.
CovarianceModel parse_covariance_model(std::string_view code);
std::span<const CovarianceModel> all_covariance_models();
CovarianceFamily family(CovarianceModel model);

/// Free covariance parameters of `model` in `dim` dimensions with `n_classes` groups.
int covariance_parameter_count(CovarianceModel model, int dim, int n_classes);
/// Full parameter count: (G - 1) proportions + G * dim means + covariance parameters.
int parameter_count(CovarianceModel model, int dim, int n_classes);

struct EigenDecomposition {
    double volume = 0.0;          // lambda = det(Sigma)^(1/P)
    Eigen::MatrixXd orientation;  // D, orthogonal, columns ordered by decreasing eigenvalue
    Eigen::VectorXd shape;        // diagonal of A, prod = 1

    Eigen::MatrixXd recompose() const;
};

/// Splits a symmetric positive-definite matrix into volume, orientation and shape.
/// Eigenvectors are sign-normalized so their largest-magnitude entry is positive.
EigenDecomposition decompose_covariance(const Eigen::MatrixXd& sigma);

struct ClassParams {
    Eigen::VectorXd tau;
    std::vector<Eigen::VectorXd> mu;
    std::vector<Eigen::MatrixXd> sigma;
    std::optional<Eigen::VectorXd> pooled_mu;
    std::optional<Eigen::MatrixXd> pooled_sigma;

    int n_classes() const { return static_cast<int>(tau.size()); }
    int dim() const { return mu.empty() ? 0 : static_cast<int>(mu.front().size()); }
};

/// Constrained MLE of proportions, means and covariances from the kept rows.
/// tau_g is the kept count of class g over the total kept count. Eigenvalues of
/// every covariance are floored at max(1e-10, 1e-8 * largest eigenvalue).
ClassParams estimate_class_params(const LabeledDataset& data, const TrimmingState& keep, CovarianceModel model);
ClassParams estimate_class_params(const Eigen::MatrixXd& x, std::span<const int> labels, int n_classes,
                                  const TrimmingState& keep, CovarianceModel model);

/// Kept-row mean.
Eigen::VectorXd pooled_mean(const Eigen::MatrixXd& x, const TrimmingState& keep);
/// Ellipsoidal scatter of the kept rows about their mean divided by the kept count,
/// reduced to its diagonal for *I codes and to mean-diagonal times I for EII/VII.
Eigen::MatrixXd pooled_covariance(const Eigen::MatrixXd& x, const TrimmingState& keep, CovarianceModel model);

/// Floors eigenvalues at max(1e-10, 1e-8 * largest). Returns the input unchanged when no floor is hit.
Eigen::MatrixXd regularize_covariance(const Eigen::MatrixXd& sigma);

/// Log-determinant through a Cholesky factor; falls back to floored eigenvalues
/// (and sets `*floored`) when the matrix is not numerically positive definite.
double log_det(const Eigen::MatrixXd& sigma, bool* floored = nullptr);

/// Multivariate normal log-density with a cached factorization. Rank-deficient
/// covariances use the g-inverse form restricted to the nonzero eigenvalues.
class GaussianDensity {
public:
    GaussianDensity() = default;
    GaussianDensity(Eigen::VectorXd mean, const Eigen::MatrixXd& sigma);

    int dim() const { return static_cast<int>(mean_.size()); }
    int rank() const { return rank_; }
    bool singular() const { return singular_; }
    /// Log of the product of the nonzero eigenvalues.
    double log_det() const { return log_det_; }

    double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    /// Log-density of each row of `x`.
    Eigen::VectorXd log_density_rows(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd whitening_;  // W with (x - mu)' Sigma^- (x - mu) = |W (x - mu)|^2
    double log_det_ = 0.0;
    int rank_ = 0;
    bool singular_ = false;
};

double gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma);

/// Quantile of the chi-square distribution with `df` degrees of freedom.
double chi_square_quantile(int df, double prob);

/// Squared Mahalanobis distance of x from N(mu, sigma); sigma must be positive definite.
double squared_mahalanobis(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma);

}  // namespace robsel
