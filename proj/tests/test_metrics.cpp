#include "aer/metrics.hpp"

#include "aer/common.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

using namespace aer;

TEST_CASE("confusion: perfect and all-majority predictors") {
    std::vector<int> truth{1, 1, 0, 0, 0, 0, 0, 0, 0, 0};
    ConfusionCounts perfect = confusion(truth, truth);
    CHECK(perfect.tp == 2);
    CHECK(perfect.tn == 8);
    CHECK(perfect.fp == 0);
    CHECK(perfect.fn == 0);

    std::vector<int> zeros(10, 0);
    ConfusionCounts dull = confusion(truth, zeros);
    CHECK(dull.tp == 0);
    CHECK(dull.fn == 2);
    CHECK(dull.tn == 8);
    CHECK(dull.fp == 0);
}

TEST_CASE("confusion: counts match a naive loop oracle on random vectors") {
    std::mt19937_64 rng(7);
    std::bernoulli_distribution coin(0.3);
    std::vector<int> truth(100), pred(100);
    for (int i = 0; i < 100; ++i) {
        truth[static_cast<std::size_t>(i)] = coin(rng) ? 1 : 0;
        pred[static_cast<std::size_t>(i)] = coin(rng) ? 1 : 0;
    }
    ConfusionCounts c = confusion(truth, pred);
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (int i = 0; i < 100; ++i) {
        int y = truth[static_cast<std::size_t>(i)], p = pred[static_cast<std::size_t>(i)];
        tp += (y == 1 && p == 1);
        fn += (y == 1 && p == 0);
        fp += (y == 0 && p == 1);
        tn += (y == 0 && p == 0);
    }
    CHECK(c.tp == tp);
    CHECK(c.fp == fp);
    CHECK(c.tn == tn);
    CHECK(c.fn == fn);
    CHECK(c.total() == 100);

    CHECK_THROWS_AS(confusion(truth, std::vector<int>{1}), StageError);
    CHECK_THROWS_AS(confusion(std::vector<int>{2}, std::vector<int>{1}), StageError);
}

TEST_CASE("compute_metrics: published-table arithmetic on the recall pair") {
    // recalls 0.8333 and 0.8733 realized exactly with denominator 10000
    ConfusionCounts c;
    c.tp = 8333;
    c.fn = 1667;
    c.tn = 8733;
    c.fp = 1267;
    MetricsReport r = compute_metrics(c);
    REQUIRE(r.balanced_accuracy.has_value());
    CHECK(std::abs(*r.balanced_accuracy - 0.8533) < 1e-12);
    REQUIRE(r.tp_fp_ratio.has_value());
    CHECK(std::abs(*r.tp_fp_ratio - 6.58) < 0.02);
}

TEST_CASE("compute_metrics: degenerate cases carry undefined markers, never NaN") {
    ConfusionCounts perfect;
    perfect.tp = 3;
    perfect.tn = 7;
    MetricsReport r = compute_metrics(perfect);
    CHECK(*r.balanced_accuracy == doctest::Approx(1.0));
    CHECK_FALSE(r.tp_fp_ratio.has_value());  // majority recall is 1

    ConfusionCounts dull;  // all-majority predictor
    dull.fn = 2;
    dull.tn = 8;
    MetricsReport d = compute_metrics(dull);
    CHECK(*d.balanced_accuracy == doctest::Approx(0.5));
    CHECK_FALSE(d.f1.has_value());
    CHECK_FALSE(d.minority_precision.has_value());
    for (const auto& field : {d.minority_recall, d.majority_recall, d.g_mean_recall})
        if (field) CHECK(std::isfinite(*field));

    ConfusionCounts one_class;  // no minority instances at all
    one_class.tn = 5;
    MetricsReport o = compute_metrics(one_class);
    CHECK_FALSE(o.minority_recall.has_value());
    CHECK_FALSE(o.balanced_accuracy.has_value());
}

TEST_CASE("compute_metrics: g-mean uses minority precision*recall; recall variant distinct") {
    ConfusionCounts c;
    c.tp = 6;
    c.fn = 2;
    c.fp = 3;
    c.tn = 9;
    MetricsReport r = compute_metrics(c);
    double prec = 6.0 / 9.0;
    double rec = 6.0 / 8.0;
    CHECK(*r.g_mean == doctest::Approx(std::sqrt(prec * rec)));
    CHECK(*r.g_mean_recall == doctest::Approx(std::sqrt(rec * (9.0 / 12.0))));
    CHECK(*r.f1 == doctest::Approx(2.0 * prec * rec / (prec + rec)));
}

TEST_CASE("compute_metrics: class swap exchanges the recalls, balanced accuracy fixed") {
    std::mt19937_64 rng(13);
    std::bernoulli_distribution coin(0.4);
    std::vector<int> truth(60), pred(60);
    for (int i = 0; i < 60; ++i) {
        truth[static_cast<std::size_t>(i)] = coin(rng) ? 1 : 0;
        pred[static_cast<std::size_t>(i)] = coin(rng) ? 1 : 0;
    }
    truth[0] = 1;
    truth[1] = 0;
    std::vector<int> truth_swapped(60), pred_swapped(60);
    for (int i = 0; i < 60; ++i) {
        truth_swapped[static_cast<std::size_t>(i)] = 1 - truth[static_cast<std::size_t>(i)];
        pred_swapped[static_cast<std::size_t>(i)] = 1 - pred[static_cast<std::size_t>(i)];
    }
    MetricsReport a = compute_metrics(confusion(truth, pred));
    MetricsReport b = compute_metrics(confusion(truth_swapped, pred_swapped));
    CHECK(*a.minority_recall == doctest::Approx(*b.majority_recall));
    CHECK(*a.majority_recall == doctest::Approx(*b.minority_recall));
    CHECK(*a.balanced_accuracy == doctest::Approx(*b.balanced_accuracy));
}

TEST_CASE("compute_metrics: every defined field agrees with naive recomputation") {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> count(0, 40);
    for (int trial = 0; trial < 50; ++trial) {
        ConfusionCounts c;
        c.tp = count(rng);
        c.fp = count(rng);
        c.tn = count(rng);
        c.fn = count(rng);
        if (c.total() == 0) continue;
        MetricsReport r = compute_metrics(c);
        auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp),
             tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
        if (tp + fn > 0) CHECK(*r.minority_recall == tp / (tp + fn));
        if (tn + fp > 0) CHECK(*r.majority_recall == tn / (tn + fp));
        if (tp + fp > 0) CHECK(*r.minority_precision == tp / (tp + fp));
        if (tn + fn > 0) CHECK(*r.majority_precision == tn / (tn + fn));
        if (tp + fn > 0 && tn + fp > 0) {
            CHECK(*r.balanced_accuracy == (tp / (tp + fn) + tn / (tn + fp)) / 2.0);
            if (fp > 0)
                CHECK(*r.tp_fp_ratio ==
                      doctest::Approx((tp / (tp + fn)) / (1.0 - tn / (tn + fp))).epsilon(1e-12));
        }
    }
}

TEST_CASE("metrics json: undefined fields serialize as null") {
    ConfusionCounts dull;
    dull.fn = 2;
    dull.tn = 8;
    nlohmann::json j = metrics_to_json(compute_metrics(dull));
    CHECK(j["f1"].is_null());
    CHECK(j["balanced_accuracy"].get<double>() == doctest::Approx(0.5));
    nlohmann::json cj = confusion_to_json(dull);
    CHECK(cj["fn"] == 2);
}
