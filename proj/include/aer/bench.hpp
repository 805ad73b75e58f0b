#pragma once

#include "aer/dataset.hpp"
#include "aer/ensemble.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aer {

// Exactly one of csv_path / synthetic must be set.
struct DataSourceConfig {
    std::optional<std::string> csv_path;
    LabelColumn label_column = std::string("label");
    bool csv_has_header = true;
    std::optional<SyntheticSpec> synthetic;
};

Dataset load_source(const DataSourceConfig& source);

struct BenchmarkConfig {
    DataSourceConfig source;
    SplitSpec split;
    AerFitConfig fit;
    bool standardize = false;
    // Rows besides the always-present plain-GBM baseline.
    std::vector<std::string> methods{"aer-log", "aer-exp", "dyn-log", "dyn-exp"};
    std::uint64_t seed = 0;
};

nlohmann::json benchmark_config_to_json(const BenchmarkConfig& cfg);

// Trains every requested method on the identical split, evaluates the full
// metric suite on the test split, and runs McNemar + Wilcoxon for each
// AER-vs-baseline pair. Method failures are reported per method; the other
// rows still appear. Deterministic under cfg.seed except the "timings" object.
nlohmann::json run_benchmark(const BenchmarkConfig& cfg);

bool benchmark_had_errors(const nlohmann::json& report);

struct ScalingProbeConfig {
    std::vector<int> sizes;
    SyntheticSpec base;  // total_samples is overridden per grid cell
    SplitSpec split;
    AerFitConfig fit;
    int repeats = 3;
    double timeout_seconds = 120.0;
    std::uint64_t seed = 0;
};

// CSV text "m,t_aer_seconds,t_full_seconds" with the median of the repeats;
// a cell whose first run exceeds the timeout is left empty.
std::string run_scaling_probe(const ScalingProbeConfig& cfg);

}  // namespace aer
