#include "aer/metrics.hpp"

#include "aer/common.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace aer {

namespace {

constexpr char kStage[] = "metrics";

[[noreturn]] void fail(const std::string& message) { throw StageError(kStage, message); }

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

void put(nlohmann::json& j, const char* key, const std::optional<double>& v) {
    if (v)
        j[key] = *v;
    else
        j[key] = nullptr;
}

}  // namespace

ConfusionCounts confusion(const std::vector<int>& truth, const std::vector<int>& predicted) {
    if (truth.size() != predicted.size()) fail("truth and prediction lengths differ");
    if (truth.empty()) fail("empty prediction vectors");
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        int y = truth[i];
        int p = predicted[i];
        if ((y != 0 && y != 1) || (p != 0 && p != 1)) fail("labels must be 0 or 1");
        if (y == 1)
            p == 1 ? ++c.tp : ++c.fn;
        else
            p == 1 ? ++c.fp : ++c.tn;
    }
    return c;
}

MetricsReport compute_metrics(const ConfusionCounts& c) {
    MetricsReport r;
    r.minority_recall = ratio(c.tp, c.tp + c.fn);
    r.majority_recall = ratio(c.tn, c.tn + c.fp);
    r.minority_precision = ratio(c.tp, c.tp + c.fp);
    r.majority_precision = ratio(c.tn, c.tn + c.fn);

    if (r.minority_precision && r.minority_recall) {
        double p = *r.minority_precision;
        double q = *r.minority_recall;
        if (p + q > 0) r.f1 = 2.0 * p * q / (p + q);
        r.g_mean = std::sqrt(p * q);
    }
    if (r.minority_recall && r.majority_recall) {
        r.g_mean_recall = std::sqrt(*r.minority_recall * *r.majority_recall);
        r.balanced_accuracy = (*r.minority_recall + *r.majority_recall) / 2.0;
        if (*r.majority_recall < 1.0)
            r.tp_fp_ratio = *r.minority_recall / (1.0 - *r.majority_recall);
    }
    return r;
}

nlohmann::json metrics_to_json(const MetricsReport& r) {
    nlohmann::json j;
    put(j, "minority_recall", r.minority_recall);
    put(j, "majority_recall", r.majority_recall);
    put(j, "minority_precision", r.minority_precision);
    put(j, "majority_precision", r.majority_precision);
    put(j, "f1", r.f1);
    put(j, "g_mean", r.g_mean);
    put(j, "g_mean_recall", r.g_mean_recall);
    put(j, "balanced_accuracy", r.balanced_accuracy);
    put(j, "tp_fp_ratio", r.tp_fp_ratio);
    return j;
}

nlohmann::json confusion_to_json(const ConfusionCounts& c) {
    return nlohmann::json{{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

}  // namespace aer
