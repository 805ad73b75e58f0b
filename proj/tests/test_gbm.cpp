#include "aer/gbm.hpp"

#include "aer/common.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace aer;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Loss the residuals are the negative gradient of, for finite differencing.
double instance_loss(int y, double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z;
}

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    Eigen::MatrixXd x(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) x(i, j) = unif(rng);
    return x;
}

}  // namespace

TEST_CASE("pseudo_residuals: fixed points and saturation") {
    Eigen::VectorXd scores(3);
    scores << 0.0, 40.0, -40.0;
    std::vector<int> labels{1, 0, 1};
    Eigen::VectorXd r = pseudo_residuals(labels, scores);
    CHECK(r[0] == doctest::Approx(0.5));
    CHECK(r[1] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(r[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(pseudo_residuals(std::vector<int>{1}, scores), StageError);
}

TEST_CASE("pseudo_residuals: match central finite differences of the loss") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-4.0, 4.0);
    std::bernoulli_distribution coin(0.5);
    const double h = 1e-6;
    for (int trial = 0; trial < 50; ++trial) {
        double z = unif(rng);
        int y = coin(rng) ? 1 : 0;
        Eigen::VectorXd scores(1);
        scores << z;
        double fd = -(instance_loss(y, z + h) - instance_loss(y, z - h)) / (2.0 * h);
        Eigen::VectorXd r = pseudo_residuals({y}, scores);
        CHECK(r[0] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("fit_tree: constant targets collapse to a single leaf") {
    Eigen::MatrixXd x = random_matrix(30, 3, 11);
    Eigen::VectorXd targets = Eigen::VectorXd::Constant(30, 0.75);
    RegressionTree tree = fit_tree(x, targets, GbmConfig{});
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].is_leaf());
    CHECK(tree.nodes[0].value == doctest::Approx(0.75));
}

TEST_CASE("fit_tree: indicator target splits on feature 0 at a sign boundary") {
    Eigen::MatrixXd x = random_matrix(60, 2, 12);
    Eigen::VectorXd targets(60);
    for (int i = 0; i < 60; ++i) targets[i] = x(i, 0) > 0 ? 1.0 : 0.0;
    GbmConfig cfg;
    cfg.max_depth = 1;
    RegressionTree tree = fit_tree(x, targets, cfg);
    REQUIRE(!tree.nodes[0].is_leaf());
    CHECK(tree.nodes[0].feature == 0);
    // the chosen threshold separates the signs
    double neg_max = -1e9, pos_min = 1e9;
    for (int i = 0; i < 60; ++i) {
        if (x(i, 0) <= 0)
            neg_max = std::max(neg_max, x(i, 0));
        else
            pos_min = std::min(pos_min, x(i, 0));
    }
    CHECK(tree.nodes[0].threshold > neg_max);
    CHECK(tree.nodes[0].threshold < pos_min);
}

TEST_CASE("fit_tree: training squared error never exceeds target variance") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Eigen::MatrixXd x = random_matrix(50, 3, 100 + seed);
        Eigen::VectorXd targets = random_matrix(50, 1, 200 + seed).col(0);
        RegressionTree tree = fit_tree(x, targets, GbmConfig{});
        Eigen::VectorXd fitted = tree.predict(x);
        double mean = targets.mean();
        double variance = (targets.array() - mean).square().sum();
        double sse = (targets - fitted).squaredNorm();
        CHECK(sse <= variance + 1e-9);
    }
}

TEST_CASE("fit_gbm: constant labels predict that class immediately") {
    Eigen::MatrixXd x = random_matrix(25, 2, 31);
    std::vector<int> ones(25, 1);
    BoostedModel model = fit_gbm(x, ones, GbmConfig{});
    std::vector<int> pred = model.predict_labels(x);
    CHECK(std::all_of(pred.begin(), pred.end(), [](int v) { return v == 1; }));

    std::vector<int> zeros(25, 0);
    BoostedModel zero_model = fit_gbm(x, zeros, GbmConfig{});
    std::vector<int> zpred = zero_model.predict_labels(x);
    CHECK(std::all_of(zpred.begin(), zpred.end(), [](int v) { return v == 0; }));
}

TEST_CASE("fit_gbm: linearly separable data reaches 0.99 training accuracy") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> noise(0.0, 1.0);
    Eigen::MatrixXd x(200, 2);
    std::vector<int> y(200);
    for (int i = 0; i < 200; ++i) {
        double cls = i < 100 ? -2.5 : 2.5;
        x(i, 0) = cls + noise(rng);
        x(i, 1) = noise(rng);
        y[static_cast<std::size_t>(i)] = i < 100 ? 0 : 1;
    }
    GbmConfig cfg;
    cfg.n_rounds = 20;
    cfg.max_depth = 3;
    BoostedModel model = fit_gbm(x, y, cfg);
    std::vector<int> pred = model.predict_labels(x);
    int correct = 0;
    for (int i = 0; i < 200; ++i)
        if (pred[static_cast<std::size_t>(i)] == y[static_cast<std::size_t>(i)]) ++correct;
    CHECK(correct >= 198);
}

TEST_CASE("fit_gbm: training loss trace is non-increasing") {
    std::mt19937_64 rng(67);
    std::bernoulli_distribution coin(0.3);
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
        int m = 40 + static_cast<int>(seed * 7);
        Eigen::MatrixXd x = random_matrix(m, 3, 300 + seed);
        std::vector<int> y(static_cast<std::size_t>(m));
        int positives = 0;
        for (auto& v : y) positives += (v = coin(rng) ? 1 : 0);
        if (positives == 0) y[0] = 1;
        if (positives == m) y[0] = 0;
        GbmConfig cfg;
        cfg.n_rounds = 8;
        cfg.max_depth = 3;
        BoostedModel model = fit_gbm(x, y, cfg);
        for (std::size_t t = 1; t < model.train_loss_trace.size(); ++t)
            CHECK(model.train_loss_trace[t] <= model.train_loss_trace[t - 1] + 1e-9);
    }
}

TEST_CASE("predict: empty stage list with zero base score gives 0.5 scores") {
    BoostedModel model;
    model.base_score = 0.0;
    model.n_features = 2;
    Eigen::MatrixXd x = random_matrix(5, 2, 71);
    Eigen::VectorXd scores = model.predict_scores(x);
    for (int i = 0; i < 5; ++i) CHECK(scores[i] == doctest::Approx(0.5));
    // threshold consistency: score >= 0.5 exactly when label is 1
    std::vector<int> labels = model.predict_labels(x);
    for (int i = 0; i < 5; ++i)
        CHECK(labels[static_cast<std::size_t>(i)] == (scores[i] >= 0.5 ? 1 : 0));
}

TEST_CASE("predict: scores equal naive per-tree summation within 1e-12") {
    std::mt19937_64 rng(81);
    std::bernoulli_distribution coin(0.4);
    Eigen::MatrixXd x = random_matrix(80, 3, 82);
    std::vector<int> y(80);
    for (auto& v : y) v = coin(rng) ? 1 : 0;
    y[0] = 1;
    y[1] = 0;
    GbmConfig cfg;
    cfg.n_rounds = 6;
    BoostedModel model = fit_gbm(x, y, cfg);

    Eigen::MatrixXd probe = random_matrix(20, 3, 83);
    Eigen::VectorXd scores = model.predict_scores(probe);
    for (int i = 0; i < 20; ++i) {
        double z = model.base_score;
        for (const auto& stage : model.stages) z += stage.step * stage.tree.predict_one(probe.row(i));
        CHECK(scores[i] == doctest::Approx(sigmoid(z)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(model.predict_scores(random_matrix(4, 2, 84)), StageError);
}

TEST_CASE("fit_gbm: permuting training rows leaves the model unchanged") {
    std::mt19937_64 rng(91);
    std::bernoulli_distribution coin(0.5);
    Eigen::MatrixXd x = random_matrix(60, 3, 92);  // continuous draws: feature values distinct
    std::vector<int> y(60);
    for (auto& v : y) v = coin(rng) ? 1 : 0;
    y[0] = 1;
    y[1] = 0;
    GbmConfig cfg;
    cfg.n_rounds = 5;
    cfg.max_depth = 4;
    BoostedModel base = fit_gbm(x, y, cfg);

    std::vector<int> perm(60);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd px(60, 3);
    std::vector<int> py(60);
    for (int i = 0; i < 60; ++i) {
        px.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
        py[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    }
    BoostedModel permuted = fit_gbm(px, py, cfg);

    REQUIRE(base.stages.size() == permuted.stages.size());
    CHECK(base.base_score == permuted.base_score);
    for (std::size_t t = 0; t < base.stages.size(); ++t) {
        CHECK(base.stages[t].step == permuted.stages[t].step);
        REQUIRE(base.stages[t].tree.nodes.size() == permuted.stages[t].tree.nodes.size());
        for (std::size_t k = 0; k < base.stages[t].tree.nodes.size(); ++k) {
            CHECK(base.stages[t].tree.nodes[k].feature == permuted.stages[t].tree.nodes[k].feature);
            CHECK(base.stages[t].tree.nodes[k].threshold ==
                  permuted.stages[t].tree.nodes[k].threshold);
            CHECK(base.stages[t].tree.nodes[k].value == permuted.stages[t].tree.nodes[k].value);
        }
    }
}

TEST_CASE("gbm json round-trip reproduces predictions bitwise") {
    std::mt19937_64 rng(95);
    std::bernoulli_distribution coin(0.5);
    Eigen::MatrixXd x = random_matrix(50, 2, 96);
    std::vector<int> y(50);
    for (auto& v : y) v = coin(rng) ? 1 : 0;
    y[0] = 1;
    y[1] = 0;
    BoostedModel model = fit_gbm(x, y, GbmConfig{});
    BoostedModel back = gbm_from_json(gbm_to_json(model));
    Eigen::MatrixXd probe = random_matrix(10, 2, 97);
    CHECK(model.predict_scores(probe) == back.predict_scores(probe));
}
