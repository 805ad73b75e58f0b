#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <utility>
#include <vector>

namespace aer {

enum class CovarianceMode { Full, Diagonal };

struct GaussianComponent {
    double weight = 0.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;  // n x n; off-diagonals are zero in Diagonal mode
};

struct GmmModel {
    std::vector<GaussianComponent> components;
    CovarianceMode covariance_mode = CovarianceMode::Full;
    double total_log_likelihood = 0.0;
    int n_params = 0;
    double aic = 0.0;
    double bic = 0.0;
    // Per-iteration training log-likelihood of the winning restart.
    std::vector<double> fit_ll_trace;

    int component_count() const { return static_cast<int>(components.size()); }
    Eigen::Index dim() const { return components.empty() ? 0 : components.front().mean.size(); }
};

struct GmmFitConfig {
    int n_restarts = 5;
    int max_iter = 200;
    double tol = 1e-5;  // relative log-likelihood change
    std::uint64_t seed = 0;
    CovarianceMode covariance_mode = CovarianceMode::Full;
    // Multiplier on the per-dimension data variance added to covariance
    // diagonals (absolute fallback when a dimension is constant); 0 disables.
    double variance_floor = 1e-6;
};

// EM fit with k-means++-style seeding, run n_restarts times (restart r seeded
// with seed + r); keeps the restart with the highest final log-likelihood.
// The per-restart log-likelihood trace is non-decreasing.
GmmModel em_fit(const Eigen::MatrixXd& samples, int n_components, const GmmFitConfig& cfg);

// Mixture log-density log sum_l w_l N(x | mu_l, Sigma_l) via log-sum-exp.
double log_density(const GmmModel& model, const Eigen::VectorXd& x);

// Unweighted log N(x | mu_l, Sigma_l) for one component.
double component_log_density(const GmmModel& model, int component, const Eigen::VectorXd& x);

// Row i of the result is x_i's log-density under each component (m x L).
Eigen::MatrixXd component_log_density_matrix(const GmmModel& model, const Eigen::MatrixXd& X);

// (aic, bic) for a model fitted on sample_count points:
// aic = 2k - 2LL, bic = log(m) k - 2LL.
std::pair<double, double> information_criteria(const GmmModel& model, double sample_count);

// Fits every candidate component count and returns the BIC minimizer;
// ties break toward the smaller count.
GmmModel select_components(const Eigen::MatrixXd& samples, const std::vector<int>& candidates,
                           const GmmFitConfig& cfg);

nlohmann::json gmm_to_json(const GmmModel& model);
GmmModel gmm_from_json(const nlohmann::json& j);

}  // namespace aer
