#include "aer/bench.hpp"

#include "aer/common.hpp"
#include "aer/metrics.hpp"
#include "aer/stattests.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>

namespace aer {

namespace {

constexpr char kStage[] = "benchmark";

[[noreturn]] void fail(const std::string& message) { throw StageError(kStage, message); }

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

nlohmann::json synthetic_to_json(const SyntheticSpec& s) {
    return {{"total_samples", s.total_samples},
            {"imbalance_ratio", s.imbalance_ratio},
            {"centers_per_class", s.centers_per_class},
            {"n_features", s.n_features},
            {"n_informative", s.n_informative},
            {"seed", s.seed}};
}

nlohmann::json fit_config_to_json(const AerFitConfig& f) {
    return {{"component_candidates", f.component_candidates},
            {"gmm",
             {{"n_restarts", f.gmm.n_restarts},
              {"max_iter", f.gmm.max_iter},
              {"tol", f.gmm.tol},
              {"covariance_mode",
               f.gmm.covariance_mode == CovarianceMode::Full ? "full" : "diagonal"},
              {"variance_floor", f.gmm.variance_floor}}},
            {"gbm",
             {{"n_rounds", f.gbm.n_rounds},
              {"max_depth", f.gbm.max_depth},
              {"learning_rate", f.gbm.learning_rate},
              {"min_samples_leaf", f.gbm.min_samples_leaf}}},
            {"sgd",
             {{"learning_rate", f.sgd.learning_rate},
              {"max_steps", f.sgd.max_steps},
              {"batch_size", f.sgd.batch_size},
              {"tol", f.sgd.tol},
              {"aic_bic_blend", f.sgd.aic_bic_blend}}},
            {"mode", f.mode == LikelihoodMode::Log ? "log" : "exp"},
            {"shifted_log", f.shifted_log},
            {"soft_outputs", f.soft_outputs}};
}

struct MethodOutcome {
    std::vector<int> predictions;
    nlohmann::json row;
};

MethodOutcome evaluate_method(const AerPipeline& pipeline, const Dataset& validation,
                              const Dataset& test, const AerFitConfig& base_cfg,
                              LikelihoodMode mode, std::optional<double> fixed_lambda,
                              bool use_trained_weights) {
    AerFitConfig cfg = base_cfg;
    cfg.mode = mode;
    AerFitResult fit = finalize_aer(pipeline, validation, cfg, fixed_lambda, use_trained_weights);
    AerModel::Prediction pred = fit.model.predict(test.features);

    MethodOutcome out;
    out.predictions = pred.labels;
    ConfusionCounts counts = confusion(test.labels, pred.labels);
    out.row["metrics"] = metrics_to_json(compute_metrics(counts));
    out.row["confusion"] = confusion_to_json(counts);
    out.row["lambda"] = fit.grid.lambda;
    out.row["delta"] = fit.grid.delta;
    out.row["validation_balanced_accuracy"] = fit.grid.balanced_accuracy;
    out.row["lambda_grid"] = fit.grid.lambda_grid;
    out.row["lambda_curve"] = fit.grid.lambda_curve;
    return out;
}

}  // namespace

Dataset load_source(const DataSourceConfig& source) {
    if (source.csv_path && source.synthetic)
        fail("exactly one data source allowed: both CSV path and synthetic spec given");
    if (source.csv_path)
        return load_csv(*source.csv_path, source.label_column,
                        CsvOptions{source.csv_has_header});
    if (source.synthetic) return generate_gmm_data(*source.synthetic);
    fail("no data source configured");
}

nlohmann::json benchmark_config_to_json(const BenchmarkConfig& cfg) {
    nlohmann::json source;
    if (cfg.source.csv_path) {
        source["csv_path"] = *cfg.source.csv_path;
        if (std::holds_alternative<std::string>(cfg.source.label_column))
            source["label_column"] = std::get<std::string>(cfg.source.label_column);
        else
            source["label_column"] = std::get<int>(cfg.source.label_column);
        source["csv_has_header"] = cfg.source.csv_has_header;
    }
    if (cfg.source.synthetic) source["synthetic"] = synthetic_to_json(*cfg.source.synthetic);
    return {{"source", std::move(source)},
            {"split",
             {{"train_frac", cfg.split.train_frac},
              {"val_frac", cfg.split.val_frac},
              {"test_frac", cfg.split.test_frac},
              {"seed", cfg.split.seed}}},
            {"fit", fit_config_to_json(cfg.fit)},
            {"standardize", cfg.standardize},
            {"methods", cfg.methods},
            {"seed", cfg.seed}};
}

nlohmann::json run_benchmark(const BenchmarkConfig& cfg) {
    auto t_total = std::chrono::steady_clock::now();

    nlohmann::json report;
    report["format_version"] = 1;
    report["config"] = benchmark_config_to_json(cfg);
    report["methods"] = nlohmann::json::object();
    report["tests"] = nlohmann::json::array();
    report["errors"] = nlohmann::json::object();
    nlohmann::json timings;
    timings["methods"] = nlohmann::json::object();

    Dataset data = load_source(cfg.source);
    SplitResult split = stratified_split(data, cfg.split);
    report["data"] = {{"m", data.row_count()},
                      {"n", data.feature_count()},
                      {"m_k", data.minority_count()},
                      {"m_n", data.majority_count()},
                      {"split_sizes",
                       {{"train", split.train.row_count()},
                        {"validation", split.validation.row_count()},
                        {"test", split.test.row_count()}}}};

    std::optional<Standardizer> standardizer;
    if (cfg.standardize) standardizer = Standardizer::fit(split.train.features);

    // The ensemble methods share one trained pipeline; only the validation
    // tuning differs per method.
    std::vector<std::string> wanted = cfg.methods;
    bool needs_pipeline = false;
    for (const auto& m : wanted)
        if (m != "gbm") needs_pipeline = true;

    std::optional<AerPipeline> pipeline;
    if (needs_pipeline) {
        auto t0 = std::chrono::steady_clock::now();
        try {
            pipeline = fit_aer_pipeline(split.train, cfg.fit, standardizer);
            report["selected_components"] = pipeline->gmm.component_count();
            report["sgd_loss_trace_first_last"] = {pipeline->sgd_loss_trace.front(),
                                                   pipeline->sgd_loss_trace.back()};
        } catch (const std::exception& e) {
            report["errors"]["pipeline"] = e.what();
        }
        timings["pipeline_seconds"] = seconds_since(t0);
    }

    std::map<std::string, std::vector<int>> predictions;

    for (const auto& name : wanted) {
        if (name == "gbm") continue;  // handled below, always present
        auto t0 = std::chrono::steady_clock::now();
        try {
            if (!pipeline) throw StageError(kStage, "pipeline unavailable");
            LikelihoodMode mode =
                name.ends_with("log") ? LikelihoodMode::Log : LikelihoodMode::Exp;
            bool dynamic_only = name.starts_with("dyn");
            if (name != "aer-log" && name != "aer-exp" && name != "dyn-log" &&
                name != "dyn-exp")
                throw StageError(kStage, "unknown method: " + name);
            MethodOutcome out = evaluate_method(
                *pipeline, split.validation, split.test, cfg.fit, mode,
                dynamic_only ? std::optional<double>(1.0) : std::nullopt, !dynamic_only);
            report["methods"][name] = std::move(out.row);
            predictions[name] = std::move(out.predictions);
        } catch (const std::exception& e) {
            report["errors"][name] = e.what();
        }
        timings["methods"][name] = seconds_since(t0);
    }

    // Plain single GBM on the full training data, default 0.5 threshold.
    {
        auto t0 = std::chrono::steady_clock::now();
        try {
            Eigen::MatrixXd train_x = split.train.features;
            Eigen::MatrixXd test_x = split.test.features;
            if (standardizer) {
                train_x = standardizer->apply(train_x);
                test_x = standardizer->apply(test_x);
            }
            GbmConfig gbm_cfg = cfg.fit.gbm;
            gbm_cfg.seed = derive_seed(cfg.seed, "baseline-gbm");
            BoostedModel baseline = fit_gbm(train_x, split.train.labels, gbm_cfg);
            std::vector<int> pred = baseline.predict_labels(test_x);
            ConfusionCounts counts = confusion(split.test.labels, pred);
            nlohmann::json row;
            row["metrics"] = metrics_to_json(compute_metrics(counts));
            row["confusion"] = confusion_to_json(counts);
            report["methods"]["gbm"] = std::move(row);
            predictions["gbm"] = std::move(pred);
        } catch (const std::exception& e) {
            report["errors"]["gbm"] = e.what();
        }
        timings["methods"]["gbm"] = seconds_since(t0);
    }

    // Significance tests: each AER row against every non-AER row present.
    for (const std::string& method : {std::string("aer-log"), std::string("aer-exp")}) {
        if (!predictions.count(method)) continue;
        for (const std::string& baseline :
             {std::string("gbm"), std::string("dyn-log"), std::string("dyn-exp")}) {
            if (!predictions.count(baseline)) continue;
            PairedPredictions paired{split.test.labels, predictions[method],
                                     predictions[baseline]};
            TestResult mc = mcnemar(paired);
            TestResult wx = wilcoxon_signed_rank(paired);
            report["tests"].push_back({{"method", method},
                                       {"baseline", baseline},
                                       {"test", "mcnemar"},
                                       {"statistic", mc.statistic},
                                       {"p_value", mc.p_value},
                                       {"reject", mc.reject_at_alpha}});
            report["tests"].push_back({{"method", method},
                                       {"baseline", baseline},
                                       {"test", "wilcoxon"},
                                       {"statistic", wx.statistic},
                                       {"p_value", wx.p_value},
                                       {"reject", wx.reject_at_alpha}});
        }
    }

    timings["total_seconds"] = seconds_since(t_total);
    report["timings"] = std::move(timings);
    return report;
}

bool benchmark_had_errors(const nlohmann::json& report) {
    return report.contains("errors") && !report["errors"].empty();
}

std::string run_scaling_probe(const ScalingProbeConfig& cfg) {
    if (cfg.sizes.empty()) fail("no dataset sizes given");
    std::string csv = "m,t_aer_seconds,t_full_seconds\n";
    for (int m : cfg.sizes) {
        SyntheticSpec spec = cfg.base;
        spec.total_samples = m;
        spec.seed = derive_seed(cfg.seed, "probe-" + std::to_string(m));
        Dataset data = generate_gmm_data(spec);
        SplitSpec split_spec = cfg.split;
        split_spec.seed = spec.seed;
        SplitResult split = stratified_split(data, split_spec);

        auto median_time = [&](auto&& fn) -> std::optional<double> {
            std::vector<double> times;
            for (int r = 0; r < cfg.repeats; ++r) {
                auto t0 = std::chrono::steady_clock::now();
                fn();
                double elapsed = seconds_since(t0);
                if (elapsed > cfg.timeout_seconds) return std::nullopt;  // cell skipped
                times.push_back(elapsed);
            }
            std::sort(times.begin(), times.end());
            return times[times.size() / 2];
        };

        std::optional<double> t_aer = median_time([&] {
            AerFitConfig fit = cfg.fit;
            fit.seed = spec.seed;
            (void)fit_aer(split.train, split.validation, fit);
        });
        std::optional<double> t_full = median_time([&] {
            GbmConfig gbm_cfg = cfg.fit.gbm;
            (void)fit_gbm(split.train.features, split.train.labels, gbm_cfg);
        });

        char buf[96];
        std::string aer_field = t_aer ? (std::snprintf(buf, sizeof(buf), "%.6f", *t_aer), buf) : "";
        std::string full_field =
            t_full ? (std::snprintf(buf, sizeof(buf), "%.6f", *t_full), buf) : "";
        csv += std::to_string(m) + "," + aer_field + "," + full_field + "\n";
    }
    return csv;
}

}  // namespace aer
