#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <vector>

namespace aer {

struct GbmConfig {
    int n_rounds = 10;
    int max_depth = 6;
    double learning_rate = 0.3;  // shrinkage on the per-round line-search step
    int min_samples_leaf = 1;
    std::uint64_t seed = 0;
};

// Axis-aligned regression tree stored as a flat node array (root at 0).
// Leaves have feature < 0 and carry the mean target of their rows.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

struct BoostedStage {
    RegressionTree tree;
    double step = 0.0;  // shrunk line-search step applied to the tree output
};

// Additive log-odds model: score(x) = base_score + sum_t step_t * tree_t(x).
struct BoostedModel {
    double base_score = 0.0;
    std::vector<BoostedStage> stages;
    Eigen::Index n_features = 0;
    // Full-data training loss after round 0 (prior only) and after each stage.
    std::vector<double> train_loss_trace;

    Eigen::VectorXd decision_scores(const Eigen::MatrixXd& X) const;  // log-odds
    Eigen::VectorXd predict_scores(const Eigen::MatrixXd& X) const;   // probabilities
    std::vector<int> predict_labels(const Eigen::MatrixXd& X) const;  // score >= 0.5
};

// Negative gradient of the logistic loss at the given log-odds scores:
// y - sigmoid(score), one entry per instance.
Eigen::VectorXd pseudo_residuals(const std::vector<int>& labels, const Eigen::VectorXd& scores);

// Greedy exact least-squares tree on the targets; midpoint thresholds over
// sorted unique feature values.
RegressionTree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& targets,
                        const GbmConfig& cfg);

// Boosting on the logistic loss. Each round fits a tree to the pseudo
// residuals and applies one Newton line-search step times the shrinkage,
// backtracked so the training loss never increases.
BoostedModel fit_gbm(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                     const GbmConfig& cfg);

// Behavioral contract every base classifier in the ensemble satisfies.
class BaseClassifier {
public:
    virtual ~BaseClassifier() = default;
    virtual void fit(const Eigen::MatrixXd& X, const std::vector<int>& labels) = 0;
    virtual std::vector<int> predict(const Eigen::MatrixXd& X) const = 0;
    virtual Eigen::VectorXd predict_score(const Eigen::MatrixXd& X) const = 0;
};

class GbmClassifier final : public BaseClassifier {
public:
    explicit GbmClassifier(GbmConfig cfg = {}) : cfg_(cfg) {}
    explicit GbmClassifier(BoostedModel model) : model_(std::move(model)) {}

    void fit(const Eigen::MatrixXd& X, const std::vector<int>& labels) override {
        model_ = fit_gbm(X, labels, cfg_);
    }
    std::vector<int> predict(const Eigen::MatrixXd& X) const override {
        return model_.predict_labels(X);
    }
    Eigen::VectorXd predict_score(const Eigen::MatrixXd& X) const override {
        return model_.predict_scores(X);
    }
    const BoostedModel& model() const { return model_; }

private:
    GbmConfig cfg_;
    BoostedModel model_;
};

nlohmann::json gbm_to_json(const BoostedModel& model);
BoostedModel gbm_from_json(const nlohmann::json& j);

}  // namespace aer
