#pragma once

#include "aer/dataset.hpp"
#include "aer/gbm.hpp"
#include "aer/gmm.hpp"
#include "aer/resample.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace aer {

enum class LikelihoodMode { Log, Exp };

struct SgdConfig {
    double learning_rate = 0.05;  // base rate, further capped at 1/||gradient||
    int max_steps = 2000;
    int batch_size = 32;
    double tol = 1e-6;  // relative full-data loss change
    std::uint64_t seed = 0;
    double aic_bic_blend = 0.6;  // weight on AIC in the initialization metric
};

// Normalized reciprocals of blend*AIC + (1-blend)*BIC per classifier.
// Nonpositive blended values are first shifted by (1 - min) to keep the
// reciprocals defined while preserving the ordering.
Eigen::VectorXd init_weights(const Eigen::VectorXd& aic_per_classifier,
                             const Eigen::VectorXd& bic_per_classifier, double blend);

// Two-class cross-entropy of the linear combination w^T f(x_i); inner
// products are clamped to [1e-12, 1 - 1e-12] before the logs.
double cross_entropy_loss(const Eigen::VectorXd& weights, const Eigen::MatrixXd& outputs,
                          const std::vector<int>& labels);

// Gradient of the loss above: sum_i f(x_i) / ((1 - y_i) - w^T f(x_i)).
Eigen::VectorXd loss_gradient(const Eigen::VectorXd& weights, const Eigen::MatrixXd& outputs,
                              const std::vector<int>& labels);

// Clamp each component to [0,1] and renormalize by the sum.
// Throws when everything clamps to zero (divergent step).
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

struct SgdResult {
    Eigen::VectorXd weights;
    std::vector<double> loss_trace;  // full-data loss at init and per step
};

// Projected minibatch SGD on the simplex. The effective step is
// min(learning_rate, 1/||g||); stops on relative loss change <= tol or
// max_steps. Returns the best full-data-loss iterate seen, so the loss at
// return never exceeds the loss at init.
SgdResult sgd_train(const Eigen::MatrixXd& outputs, const std::vector<int>& labels,
                    const Eigen::VectorXd& init, const SgdConfig& cfg,
                    std::vector<Eigen::VectorXd>* step_trace = nullptr);

// Per-instance dynamic weights of length 2L: each component's (log-)density is
// duplicated to its type-A and type-B classifier slots, then the vector is
// normalized by its sum. Exp mode shifts in log space before exponentiating;
// shifted_log replaces raw log-densities with (log density - max log density).
Eigen::VectorXd likelihood_weights(const GmmModel& gmm, const Eigen::VectorXd& x,
                                   LikelihoodMode mode, bool shifted_log = false);

// Row i holds likelihood_weights for row i of X.
Eigen::MatrixXd likelihood_weight_matrix(const GmmModel& gmm, const Eigen::MatrixXd& X,
                                         LikelihoodMode mode, bool shifted_log = false);

// w* = lambda * dynamic + (1 - lambda) * trained.
Eigen::VectorXd interpolate_weights(const Eigen::VectorXd& dynamic_weights,
                                    const Eigen::VectorXd& trained_weights, double lambda);

// Hard (default) or soft base-classifier outputs, one column per classifier.
Eigen::MatrixXd classifier_outputs(const std::vector<BoostedModel>& classifiers,
                                   const Eigen::MatrixXd& X, bool soft);

struct AerModel {
    GmmModel gmm;
    // 2L entries: [0, L) trained on type-A subsets, [L, 2L) on type-B,
    // aligned with the mixture component of the same index mod L.
    std::vector<BoostedModel> classifiers;
    Eigen::VectorXd weights;      // SGD-trained static weights
    double interpolation = 0.0;   // lambda in [0, 1]
    double threshold = 0.5;       // delta in [0, 1]
    LikelihoodMode mode = LikelihoodMode::Exp;
    bool shifted_log = false;
    bool soft_outputs = false;
    std::optional<Standardizer> standardizer;

    struct Prediction {
        std::vector<int> labels;
        Eigen::VectorXd scores;
    };
    // Applies the standardizer when present; label 1 iff score >= threshold.
    Prediction predict(const Eigen::MatrixXd& X) const;
};

struct GridSearchResult {
    double lambda = 0.0;
    double delta = 0.5;
    double balanced_accuracy = 0.0;
    std::vector<double> lambda_grid;
    std::vector<double> lambda_curve;  // best balanced accuracy over delta per lambda
};

// Joint grid over lambda {0, 0.05, ..., 1} and delta {0.025, ..., 0.975},
// maximizing validation balanced accuracy; ties prefer lambda closer to 0.5,
// then delta closer to 0.5. fixed_lambda restricts the grid to one value.
GridSearchResult grid_search_lambda_delta(const Eigen::MatrixXd& val_outputs,
                                          const Eigen::MatrixXd& val_dynamic_weights,
                                          const Eigen::VectorXd& trained_weights,
                                          const std::vector<int>& val_labels,
                                          std::optional<double> fixed_lambda = std::nullopt);

struct AerFitConfig {
    std::vector<int> component_candidates{8, 9, 10};
    GmmFitConfig gmm;
    GbmConfig gbm;
    SgdConfig sgd;
    LikelihoodMode mode = LikelihoodMode::Exp;
    bool shifted_log = false;
    bool soft_outputs = false;
    std::uint64_t seed = 0;  // master seed; stage seeds derive from it
};

// Everything the training split determines, before validation tuning.
// Shared by the AER variants and the pure dynamic-ensemble baseline.
struct AerPipeline {
    GmmModel gmm;
    std::vector<SubsetPlan> plans;       // 2L, type-A first
    std::vector<TomekReport> tomek;      // per type-A subset
    std::vector<BoostedModel> classifiers;
    Eigen::VectorXd aic_per_classifier;
    Eigen::VectorXd bic_per_classifier;
    Eigen::VectorXd initial_weights;
    Eigen::VectorXd trained_weights;
    std::vector<double> sgd_loss_trace;
    std::optional<Standardizer> standardizer;
    bool soft_outputs = false;
};

AerPipeline fit_aer_pipeline(const Dataset& train, const AerFitConfig& cfg,
                             std::optional<Standardizer> standardizer = std::nullopt);

struct AerFitResult {
    AerModel model;
    GridSearchResult grid;
    std::vector<double> sgd_loss_trace;
};

// Validation tuning of (lambda, delta) and final model assembly. Passing
// fixed_lambda = 1 with use_trained_weights = false yields the pure dynamic
// ensemble baseline.
AerFitResult finalize_aer(const AerPipeline& pipeline, const Dataset& validation,
                          const AerFitConfig& cfg,
                          std::optional<double> fixed_lambda = std::nullopt,
                          bool use_trained_weights = true);

// The full pipeline: component selection, subset construction, base-classifier
// training, weight initialization and SGD, then validation grid search.
AerFitResult fit_aer(const Dataset& train, const Dataset& validation, const AerFitConfig& cfg,
                     std::optional<Standardizer> standardizer = std::nullopt);

nlohmann::json aer_model_to_json(const AerModel& model);
AerModel aer_model_from_json(const nlohmann::json& j);

}  // namespace aer
