#include "aer/gbm.hpp"

#include "aer/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace aer {

namespace {

constexpr char kStage[] = "gbm";

[[noreturn]] void fail(const std::string& message) { throw StageError(kStage, message); }

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// Logistic loss summed over instances; order-independent so that permuting
// training rows cannot change line-search decisions.
double logistic_loss(const std::vector<int>& labels, const Eigen::VectorXd& scores) {
    std::vector<double> terms(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double z = scores[static_cast<Eigen::Index>(i)];
        terms[i] = softplus(z) - labels[i] * z;
    }
    return stable_sum(std::move(terms));
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

// Sum of squared deviations from the mean, from the aggregate sums.
double node_sse(double sum, double sum_sq, double count) {
    return sum_sq - sum * sum / count;
}

// Exact greedy split search over one node's rows.
SplitChoice best_split(const Eigen::MatrixXd& X, const Eigen::VectorXd& targets,
                       const std::vector<int>& rows, int min_samples_leaf) {
    const auto count = static_cast<double>(rows.size());
    std::vector<double> node_targets(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) node_targets[i] = targets[rows[i]];
    double total_sum = stable_sum(node_targets);
    double total_sq = 0.0;
    {
        std::vector<double> sq(node_targets.size());
        for (std::size_t i = 0; i < node_targets.size(); ++i) sq[i] = node_targets[i] * node_targets[i];
        total_sq = stable_sum(std::move(sq));
    }
    double parent_sse = node_sse(total_sum, total_sq, count);

    SplitChoice best;
    if (parent_sse <= 1e-12) return best;  // constant targets

    std::vector<std::pair<double, double>> ordered(rows.size());  // (value, target)
    for (int feature = 0; feature < X.cols(); ++feature) {
        for (std::size_t i = 0; i < rows.size(); ++i)
            ordered[i] = {X(rows[i], feature), targets[rows[i]]};
        // Secondary key makes prefix sums independent of input row order.
        std::sort(ordered.begin(), ordered.end());

        double left_sum = 0.0, left_sq = 0.0;
        for (std::size_t i = 0; i + 1 < ordered.size(); ++i) {
            left_sum += ordered[i].second;
            left_sq += ordered[i].second * ordered[i].second;
            if (ordered[i].first == ordered[i + 1].first) continue;
            auto left_n = static_cast<double>(i + 1);
            double right_n = count - left_n;
            if (left_n < min_samples_leaf || right_n < min_samples_leaf) continue;
            double right_sum = total_sum - left_sum;
            double right_sq = total_sq - left_sq;
            double gain = parent_sse - node_sse(left_sum, left_sq, left_n) -
                          node_sse(right_sum, right_sq, right_n);
            // Strict improvement only: the ascending (feature, threshold) scan
            // makes equal-gain ties resolve to the smallest pair.
            if (gain > best.gain) {
                best.feature = feature;
                best.threshold = 0.5 * (ordered[i].first + ordered[i + 1].first);
                best.gain = gain;
            }
        }
    }
    if (best.gain <= 0.0) best.feature = -1;
    return best;
}

double leaf_mean(const Eigen::VectorXd& targets, const std::vector<int>& rows) {
    std::vector<double> values(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) values[i] = targets[rows[i]];
    return stable_sum(std::move(values)) / static_cast<double>(rows.size());
}

void grow(RegressionTree& tree, int node, const Eigen::MatrixXd& X,
          const Eigen::VectorXd& targets, std::vector<int> rows, int depth,
          const GbmConfig& cfg) {
    if (depth >= cfg.max_depth ||
        static_cast<int>(rows.size()) < 2 * cfg.min_samples_leaf) {
        tree.nodes[static_cast<std::size_t>(node)].value = leaf_mean(targets, rows);
        return;
    }
    SplitChoice split = best_split(X, targets, rows, cfg.min_samples_leaf);
    if (split.feature < 0) {
        tree.nodes[static_cast<std::size_t>(node)].value = leaf_mean(targets, rows);
        return;
    }
    std::vector<int> left_rows, right_rows;
    for (int r : rows) {
        if (X(r, split.feature) <= split.threshold)
            left_rows.push_back(r);
        else
            right_rows.push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    int left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    int right = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    auto& nd = tree.nodes[static_cast<std::size_t>(node)];
    nd.feature = split.feature;
    nd.threshold = split.threshold;
    nd.left = left;
    nd.right = right;
    grow(tree, left, X, targets, std::move(left_rows), depth + 1, cfg);
    grow(tree, right, X, targets, std::move(right_rows), depth + 1, cfg);
}

}  // namespace

double RegressionTree::predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int node = 0;
    while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
        const auto& nd = nodes[static_cast<std::size_t>(node)];
        node = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(node)].value;
}

Eigen::VectorXd RegressionTree::predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = predict_one(X.row(i));
    return out;
}

Eigen::VectorXd pseudo_residuals(const std::vector<int>& labels, const Eigen::VectorXd& scores) {
    if (static_cast<Eigen::Index>(labels.size()) != scores.size())
        fail("labels and scores length mismatch");
    Eigen::VectorXd r(scores.size());
    for (Eigen::Index i = 0; i < scores.size(); ++i)
        r[i] = labels[static_cast<std::size_t>(i)] - sigmoid(scores[i]);
    return r;
}

RegressionTree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& targets,
                        const GbmConfig& cfg) {
    if (X.rows() == 0) fail("empty input to fit_tree");
    if (X.rows() != targets.size()) fail("targets length mismatch");
    if (X.rows() < cfg.min_samples_leaf) fail("fewer rows than min_samples_leaf");
    RegressionTree tree;
    tree.nodes.emplace_back();
    std::vector<int> rows(static_cast<std::size_t>(X.rows()));
    std::iota(rows.begin(), rows.end(), 0);
    grow(tree, 0, X, targets, std::move(rows), 0, cfg);
    return tree;
}

BoostedModel fit_gbm(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                     const GbmConfig& cfg) {
    if (X.rows() == 0) fail("empty training data");
    if (static_cast<std::size_t>(X.rows()) != labels.size()) fail("labels length mismatch");
    if (cfg.n_rounds < 1 || cfg.max_depth < 1 || cfg.min_samples_leaf < 1)
        fail("invalid gbm config");
    if (cfg.learning_rate <= 0.0 || cfg.learning_rate > 1.0)
        fail("learning_rate must be in (0, 1]");

    BoostedModel model;
    model.n_features = X.cols();

    // Prior log-odds; clamped so single-class inputs stay finite.
    double positives = 0.0;
    for (int y : labels) positives += y;
    double prior = positives / static_cast<double>(labels.size());
    prior = std::clamp(prior, 1e-6, 1.0 - 1e-6);
    model.base_score = std::log(prior / (1.0 - prior));

    Eigen::VectorXd scores = Eigen::VectorXd::Constant(X.rows(), model.base_score);
    double loss = logistic_loss(labels, scores);
    model.train_loss_trace.push_back(loss);

    for (int round = 0; round < cfg.n_rounds; ++round) {
        Eigen::VectorXd residuals = pseudo_residuals(labels, scores);
        RegressionTree tree = fit_tree(X, residuals, cfg);
        Eigen::VectorXd tree_out = tree.predict(X);

        // One Newton step for the 1-D optimization over the step size.
        std::vector<double> num_terms(labels.size()), den_terms(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            auto idx = static_cast<Eigen::Index>(i);
            double p = sigmoid(scores[idx]);
            num_terms[i] = residuals[idx] * tree_out[idx];
            den_terms[i] = p * (1.0 - p) * tree_out[idx] * tree_out[idx];
        }
        double numerator = stable_sum(std::move(num_terms));
        double denominator = stable_sum(std::move(den_terms));
        double step = denominator > 1e-12 ? cfg.learning_rate * numerator / denominator : 0.0;

        // Backtrack until the full-data loss does not increase.
        double new_loss = loss;
        bool accepted = false;
        for (int halving = 0; halving < 60 && step != 0.0; ++halving) {
            new_loss = logistic_loss(labels, scores + step * tree_out);
            if (new_loss <= loss) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted || step == 0.0) {
            // No usable direction; further rounds would repeat it.
            break;
        }
        scores += step * tree_out;
        loss = new_loss;
        model.stages.push_back(BoostedStage{std::move(tree), step});
        model.train_loss_trace.push_back(loss);
    }
    return model;
}

Eigen::VectorXd BoostedModel::decision_scores(const Eigen::MatrixXd& X) const {
    if (n_features != 0 && X.cols() != n_features)
        fail("feature dimension mismatch: model expects " + std::to_string(n_features) +
             ", got " + std::to_string(X.cols()));
    Eigen::VectorXd z = Eigen::VectorXd::Constant(X.rows(), base_score);
    for (const auto& stage : stages) z += stage.step * stage.tree.predict(X);
    return z;
}

Eigen::VectorXd BoostedModel::predict_scores(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd z = decision_scores(X);
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = sigmoid(z[i]);
    return z;
}

std::vector<int> BoostedModel::predict_labels(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd p = predict_scores(X);
    std::vector<int> labels(static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i)
        labels[static_cast<std::size_t>(i)] = p[i] >= 0.5 ? 1 : 0;
    return labels;
}

nlohmann::json gbm_to_json(const BoostedModel& model) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& stage : model.stages) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& nd : stage.tree.nodes) {
            nodes.push_back({{"feature", nd.feature},
                             {"threshold", nd.threshold},
                             {"left", nd.left},
                             {"right", nd.right},
                             {"value", nd.value}});
        }
        stages.push_back({{"step", stage.step}, {"nodes", std::move(nodes)}});
    }
    return nlohmann::json{{"base_score", model.base_score},
                          {"n_features", model.n_features},
                          {"stages", std::move(stages)}};
}

BoostedModel gbm_from_json(const nlohmann::json& j) {
    BoostedModel model;
    model.base_score = j.at("base_score").get<double>();
    model.n_features = j.at("n_features").get<Eigen::Index>();
    for (const auto& js : j.at("stages")) {
        BoostedStage stage;
        stage.step = js.at("step").get<double>();
        for (const auto& jn : js.at("nodes")) {
            TreeNode nd;
            nd.feature = jn.at("feature").get<int>();
            nd.threshold = jn.at("threshold").get<double>();
            nd.left = jn.at("left").get<int>();
            nd.right = jn.at("right").get<int>();
            nd.value = jn.at("value").get<double>();
            stage.tree.nodes.push_back(nd);
        }
        if (stage.tree.nodes.empty()) fail("stage with no nodes");
        model.stages.push_back(std::move(stage));
    }
    return model;
}

}  // namespace aer
