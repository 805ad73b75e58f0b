#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace aer {

// Minority (label 1) is the positive class.
struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;

    std::int64_t total() const { return tp + fp + tn + fn; }
};

ConfusionCounts confusion(const std::vector<int>& truth, const std::vector<int>& predicted);

// Degenerate denominators yield empty optionals (rendered as "--"/null),
// never NaN.
struct MetricsReport {
    std::optional<double> minority_recall;
    std::optional<double> majority_recall;
    std::optional<double> minority_precision;
    std::optional<double> majority_precision;
    std::optional<double> f1;
    // sqrt(precision * recall) on the minority class.
    std::optional<double> g_mean;
    // Conventional variant sqrt(recall_minority * recall_majority).
    std::optional<double> g_mean_recall;
    std::optional<double> balanced_accuracy;
    // minority_recall / (1 - majority_recall); undefined at majority recall 1.
    std::optional<double> tp_fp_ratio;
};

MetricsReport compute_metrics(const ConfusionCounts& counts);

nlohmann::json metrics_to_json(const MetricsReport& report);
nlohmann::json confusion_to_json(const ConfusionCounts& counts);

}  // namespace aer
