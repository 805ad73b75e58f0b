#include "aer/bench.hpp"
#include "aer/common.hpp"
#include "aer/dataset.hpp"
#include "aer/ensemble.hpp"
#include "aer/metrics.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

using nlohmann::json;

// All writes go through a temp file and a rename so readers never see a
// partial file.
void write_file_atomic(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw aer::StageError("cli", "cannot open output file: " + path);
        out << contents;
        if (!out) throw aer::StageError("cli", "write failed: " + path);
    }
    fs::rename(tmp, target);
}

struct DataFlags {
    std::string data_path;
    std::string label_col = "label";
    bool no_header = false;
    bool synthetic = false;
    int samples = 8000;
    double ratio = 79.0;
    int centers = 9;
    int n_features = 20;
    int n_informative = 10;
};

struct FitFlags {
    std::string candidates = "8,9,10";
    std::string mode = "exp";
    bool shifted_log = false;
    bool soft_outputs = false;
    bool standardize = false;
    double train_frac = 0.6;
    double val_frac = 0.2;
    double test_frac = 0.2;
    // gmm
    int gmm_restarts = 5;
    int gmm_max_iter = 200;
    double gmm_tol = 1e-5;
    std::string covariance = "full";
    double variance_floor = 1e-6;
    // gbm
    int rounds = 10;
    int depth = 6;
    double eta = 0.3;
    int min_leaf = 1;
    // sgd
    double sgd_rate = 0.05;
    int sgd_steps = 2000;
    int batch_size = 32;
    double sgd_tol = 1e-6;
    double aic_blend = 0.6;
};

void add_data_options(CLI::App* cmd, DataFlags& f, bool with_synthetic_switch) {
    cmd->add_option("--data", f.data_path, "CSV input path");
    cmd->add_option("--label-col", f.label_col, "label column name or index")
        ->capture_default_str();
    cmd->add_flag("--no-header", f.no_header, "CSV has no header row");
    if (with_synthetic_switch)
        cmd->add_flag("--synthetic", f.synthetic, "use the built-in synthetic generator");
    cmd->add_option("--samples", f.samples, "synthetic: total sample count")
        ->capture_default_str();
    cmd->add_option("--ratio", f.ratio, "synthetic: majority-per-minority ratio")
        ->capture_default_str();
    cmd->add_option("--centers", f.centers, "synthetic: Gaussian centers per class")
        ->capture_default_str();
    cmd->add_option("--n-features", f.n_features, "synthetic: total feature count")
        ->capture_default_str();
    cmd->add_option("--n-informative", f.n_informative, "synthetic: informative feature count")
        ->capture_default_str();
}

void add_fit_options(CLI::App* cmd, FitFlags& f) {
    cmd->add_option("--candidates", f.candidates, "comma-separated component counts")
        ->capture_default_str();
    cmd->add_option("--mode", f.mode, "dynamic-weight likelihood form")
        ->check(CLI::IsMember({"log", "exp"}))
        ->capture_default_str();
    cmd->add_flag("--shifted-log", f.shifted_log,
                  "shift log-densities by their max before normalizing (log mode)");
    cmd->add_flag("--soft-outputs", f.soft_outputs,
                  "combine base-classifier probabilities instead of hard labels");
    cmd->add_flag("--standardize", f.standardize, "z-score features using training statistics");
    cmd->add_option("--train-frac", f.train_frac)->capture_default_str();
    cmd->add_option("--val-frac", f.val_frac)->capture_default_str();
    cmd->add_option("--test-frac", f.test_frac)->capture_default_str();
    cmd->add_option("--gmm-restarts", f.gmm_restarts)->capture_default_str();
    cmd->add_option("--gmm-max-iter", f.gmm_max_iter)->capture_default_str();
    cmd->add_option("--gmm-tol", f.gmm_tol)->capture_default_str();
    cmd->add_option("--covariance", f.covariance, "GMM covariance structure")
        ->check(CLI::IsMember({"full", "diagonal"}))
        ->capture_default_str();
    cmd->add_option("--variance-floor", f.variance_floor)->capture_default_str();
    cmd->add_option("--rounds", f.rounds, "boosting rounds")->capture_default_str();
    cmd->add_option("--depth", f.depth, "max tree depth")->capture_default_str();
    cmd->add_option("--eta", f.eta, "boosting shrinkage")->capture_default_str();
    cmd->add_option("--min-leaf", f.min_leaf, "min samples per leaf")->capture_default_str();
    cmd->add_option("--sgd-rate", f.sgd_rate)->capture_default_str();
    cmd->add_option("--sgd-steps", f.sgd_steps)->capture_default_str();
    cmd->add_option("--batch-size", f.batch_size)->capture_default_str();
    cmd->add_option("--sgd-tol", f.sgd_tol)->capture_default_str();
    cmd->add_option("--aic-blend", f.aic_blend, "weight on AIC in weight initialization")
        ->capture_default_str();
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> values;
    std::string item;
    std::stringstream ss(text);
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        values.push_back(std::stoi(item));
    }
    if (values.empty()) throw aer::StageError("cli", "empty integer list: '" + text + "'");
    return values;
}

aer::DataSourceConfig make_source(const DataFlags& f, std::uint64_t seed, bool synthetic_only) {
    aer::DataSourceConfig source;
    bool use_synthetic = synthetic_only || f.synthetic;
    if (!f.data_path.empty() && use_synthetic)
        throw aer::StageError("cli", "exactly one data source allowed: got --data and --synthetic");
    if (!f.data_path.empty()) {
        source.csv_path = f.data_path;
        source.csv_has_header = !f.no_header;
        source.label_column = f.label_col;
    } else if (use_synthetic) {
        aer::SyntheticSpec spec;
        spec.total_samples = f.samples;
        spec.imbalance_ratio = f.ratio;
        spec.centers_per_class = f.centers;
        spec.n_features = f.n_features;
        spec.n_informative = f.n_informative;
        spec.seed = seed;
        source.synthetic = spec;
    } else {
        throw aer::StageError("cli", "no data source: pass --data or --synthetic");
    }
    return source;
}

aer::AerFitConfig make_fit_config(const FitFlags& f, std::uint64_t seed) {
    aer::AerFitConfig cfg;
    cfg.component_candidates = parse_int_list(f.candidates);
    cfg.gmm.n_restarts = f.gmm_restarts;
    cfg.gmm.max_iter = f.gmm_max_iter;
    cfg.gmm.tol = f.gmm_tol;
    cfg.gmm.covariance_mode =
        f.covariance == "full" ? aer::CovarianceMode::Full : aer::CovarianceMode::Diagonal;
    cfg.gmm.variance_floor = f.variance_floor;
    cfg.gbm.n_rounds = f.rounds;
    cfg.gbm.max_depth = f.depth;
    cfg.gbm.learning_rate = f.eta;
    cfg.gbm.min_samples_leaf = f.min_leaf;
    cfg.sgd.learning_rate = f.sgd_rate;
    cfg.sgd.max_steps = f.sgd_steps;
    cfg.sgd.batch_size = f.batch_size;
    cfg.sgd.tol = f.sgd_tol;
    cfg.sgd.aic_bic_blend = f.aic_blend;
    cfg.mode = f.mode == "log" ? aer::LikelihoodMode::Log : aer::LikelihoodMode::Exp;
    cfg.shifted_log = f.shifted_log;
    cfg.soft_outputs = f.soft_outputs;
    cfg.seed = seed;
    return cfg;
}

aer::SplitSpec make_split(const FitFlags& f, std::uint64_t seed) {
    aer::SplitSpec split;
    split.train_frac = f.train_frac;
    split.val_frac = f.val_frac;
    split.test_frac = f.test_frac;
    split.seed = seed;
    return split;
}

int cmd_gen_data(const DataFlags& data, std::uint64_t seed, const std::string& out_path) {
    aer::SyntheticSpec spec;
    spec.total_samples = data.samples;
    spec.imbalance_ratio = data.ratio;
    spec.centers_per_class = data.centers;
    spec.n_features = data.n_features;
    spec.n_informative = data.n_informative;
    spec.seed = seed;
    aer::Dataset generated = aer::generate_gmm_data(spec);
    std::string tmp = out_path + ".gen";
    aer::save_csv(generated, tmp);
    std::filesystem::rename(tmp, out_path);
    std::cout << "wrote " << out_path << ": m=" << generated.row_count()
              << " m_k=" << generated.minority_count() << " m_n=" << generated.majority_count()
              << " n=" << generated.feature_count() << "\n";
    return 0;
}

int cmd_fit(const DataFlags& data, const FitFlags& fit, std::uint64_t seed,
            const std::string& out_path, const std::string& export_test) {
    aer::DataSourceConfig source = make_source(data, seed, false);
    aer::Dataset full = aer::load_source(source);
    aer::SplitResult split = aer::stratified_split(full, make_split(fit, seed));
    std::optional<aer::Standardizer> standardizer;
    if (fit.standardize) standardizer = aer::Standardizer::fit(split.train.features);

    aer::AerFitConfig cfg = make_fit_config(fit, seed);
    aer::AerFitResult result = aer::fit_aer(split.train, split.validation, cfg, standardizer);

    json model_json = aer::aer_model_to_json(result.model);
    write_file_atomic(out_path, model_json.dump(2) + "\n");

    // Fit log: selection summary plus the full SGD loss trace.
    std::ostringstream log;
    log << "selected_L = " << result.model.gmm.component_count() << "\n"
        << "lambda = " << result.grid.lambda << "\n"
        << "delta = " << result.grid.delta << "\n"
        << "validation_balanced_accuracy = " << result.grid.balanced_accuracy << "\n"
        << "sgd_steps = " << result.sgd_loss_trace.size() - 1 << "\n"
        << "sgd_loss_trace:\n";
    for (double loss : result.sgd_loss_trace) log << loss << "\n";
    write_file_atomic(out_path + ".fitlog", log.str());

    std::cout << "selected L = " << result.model.gmm.component_count() << "\n"
              << "lambda = " << result.grid.lambda << ", delta = " << result.grid.delta
              << " (validation balanced accuracy " << result.grid.balanced_accuracy << ")\n";
    if (!result.sgd_loss_trace.empty())
        std::cout << "sgd loss " << result.sgd_loss_trace.front() << " -> "
                  << result.sgd_loss_trace.back() << " over "
                  << result.sgd_loss_trace.size() - 1 << " steps (trace in " << out_path
                  << ".fitlog)\n";
    std::cout << "model written to " << out_path << "\n";
    if (!export_test.empty()) {
        std::string tmp = export_test + ".gen";
        aer::save_csv(split.test, tmp);
        std::filesystem::rename(tmp, export_test);
        std::cout << "held-out test split written to " << export_test << "\n";
    }
    return 0;
}

int cmd_evaluate(const std::string& model_path, const DataFlags& data,
                 const std::string& out_path) {
    std::ifstream in(model_path);
    if (!in) throw aer::StageError("cli", "cannot open model file: " + model_path);
    json model_json = json::parse(in);
    aer::AerModel model = aer::aer_model_from_json(model_json);

    if (data.data_path.empty()) throw aer::StageError("cli", "evaluate requires --data");
    aer::Dataset test = aer::load_csv(data.data_path, data.label_col,
                                      aer::CsvOptions{!data.no_header});
    Eigen::Index expect = model.classifiers.front().n_features;
    if (test.feature_count() != expect)
        throw aer::StageError("cli", "feature dimension mismatch: model expects " +
                                         std::to_string(expect) + ", data has " +
                                         std::to_string(test.feature_count()));

    aer::AerModel::Prediction pred = model.predict(test.features);
    aer::ConfusionCounts counts = aer::confusion(test.labels, pred.labels);
    json report{{"format_version", 1},
                {"model", model_path},
                {"data", data.data_path},
                {"confusion", aer::confusion_to_json(counts)},
                {"metrics", aer::metrics_to_json(aer::compute_metrics(counts))}};
    std::string text = report.dump(2) + "\n";
    std::cout << text;
    if (!out_path.empty()) write_file_atomic(out_path, text);
    return 0;
}

int cmd_benchmark(const DataFlags& data, const FitFlags& fit, const std::string& methods,
                  std::uint64_t seed, const std::string& out_path) {
    aer::BenchmarkConfig cfg;
    cfg.source = make_source(data, seed, false);
    cfg.split = make_split(fit, seed);
    cfg.fit = make_fit_config(fit, seed);
    cfg.standardize = fit.standardize;
    cfg.seed = seed;
    if (!methods.empty()) {
        cfg.methods.clear();
        std::string item;
        std::stringstream ss(methods);
        while (std::getline(ss, item, ','))
            if (!item.empty() && item != "gbm") cfg.methods.push_back(item);
    }

    json report = aer::run_benchmark(cfg);
    std::string text = report.dump(2) + "\n";
    if (!out_path.empty()) write_file_atomic(out_path, text);

    for (auto& [name, row] : report["methods"].items()) {
        const auto& ba = row["metrics"]["balanced_accuracy"];
        std::cout << name << ": balanced accuracy "
                  << (ba.is_null() ? std::string("--") : std::to_string(ba.get<double>()));
        if (row.contains("lambda"))
            std::cout << " (lambda " << row["lambda"].get<double>() << ", delta "
                      << row["delta"].get<double>() << ")";
        std::cout << "\n";
    }
    if (aer::benchmark_had_errors(report)) {
        for (auto& [name, msg] : report["errors"].items())
            std::cerr << "error in " << name << ": " << msg.get<std::string>() << "\n";
        return 1;
    }
    return 0;
}

int cmd_scaling_probe(const DataFlags& data, const FitFlags& fit, const std::string& sizes,
                      int repeats, double timeout, std::uint64_t seed,
                      const std::string& out_path) {
    aer::ScalingProbeConfig cfg;
    cfg.sizes = parse_int_list(sizes);
    cfg.base.imbalance_ratio = data.ratio;
    cfg.base.centers_per_class = data.centers;
    cfg.base.n_features = data.n_features;
    cfg.base.n_informative = data.n_informative;
    cfg.split = make_split(fit, seed);
    cfg.fit = make_fit_config(fit, seed);
    cfg.repeats = repeats;
    cfg.timeout_seconds = timeout;
    cfg.seed = seed;
    std::string csv = aer::run_scaling_probe(cfg);
    std::cout << csv;
    if (!out_path.empty()) write_file_atomic(out_path, csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive ensemble of classifiers with regularization for binary "
                 "imbalanced classification"};
    app.set_config("--config", "", "read options from an INI-style file (flags override)");
    app.require_subcommand(1);
    app.fallthrough();  // global flags like --seed may follow the subcommand

    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "global seed; per-stage seeds derive from it")
        ->capture_default_str();

    DataFlags gen_data_flags;
    std::string gen_out = "data.csv";
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic imbalanced CSV dataset");
    gen->add_option("--samples", gen_data_flags.samples)->capture_default_str();
    gen->add_option("--ratio", gen_data_flags.ratio)->capture_default_str();
    gen->add_option("--centers", gen_data_flags.centers)->capture_default_str();
    gen->add_option("--n-features", gen_data_flags.n_features)->capture_default_str();
    gen->add_option("--n-informative", gen_data_flags.n_informative)->capture_default_str();
    gen->add_option("--out", gen_out, "output CSV path")->capture_default_str();

    DataFlags fit_data;
    FitFlags fit_flags;
    std::string fit_out = "model.json";
    std::string fit_export_test;
    auto* fit = app.add_subcommand("fit", "train an AER model and write it as JSON");
    add_data_options(fit, fit_data, true);
    add_fit_options(fit, fit_flags);
    fit->add_option("--out", fit_out, "model output path")->capture_default_str();
    fit->add_option("--export-test", fit_export_test, "write the held-out test split CSV here");

    DataFlags eval_data;
    std::string eval_model;
    std::string eval_out;
    auto* eval = app.add_subcommand("evaluate", "evaluate a saved model on a labeled CSV");
    eval->add_option("--model", eval_model, "model JSON path")->required();
    eval->add_option("--data", eval_data.data_path, "CSV input path")->required();
    eval->add_option("--label-col", eval_data.label_col)->capture_default_str();
    eval->add_flag("--no-header", eval_data.no_header);
    eval->add_option("--out", eval_out, "also write the report JSON here");

    DataFlags bench_data;
    FitFlags bench_flags;
    std::string bench_methods;
    std::string bench_out = "benchmark.json";
    auto* bench = app.add_subcommand(
        "benchmark", "train AER variants plus baselines on one split and compare them");
    add_data_options(bench, bench_data, true);
    add_fit_options(bench, bench_flags);
    bench->add_option("--methods", bench_methods,
                      "comma-separated subset of aer-log,aer-exp,dyn-log,dyn-exp");
    bench->add_option("--out", bench_out, "report output path")->capture_default_str();

    DataFlags probe_data;
    FitFlags probe_flags;
    std::string probe_sizes = "1000,2000,4000";
    int probe_repeats = 3;
    double probe_timeout = 120.0;
    std::string probe_out;
    auto* probe = app.add_subcommand("scaling-probe",
                                     "time AER training against a single full-batch GBM");
    add_data_options(probe, probe_data, false);
    add_fit_options(probe, probe_flags);
    probe->add_option("--sizes", probe_sizes, "comma-separated dataset sizes")
        ->capture_default_str();
    probe->add_option("--repeats", probe_repeats)->capture_default_str();
    probe->add_option("--timeout-seconds", probe_timeout,
                      "a run past this marks its cell skipped")
        ->capture_default_str();
    probe->add_option("--out", probe_out, "timing CSV output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(gen_data_flags, seed, gen_out);
        if (fit->parsed()) return cmd_fit(fit_data, fit_flags, seed, fit_out, fit_export_test);
        if (eval->parsed()) return cmd_evaluate(eval_model, eval_data, eval_out);
        if (bench->parsed())
            return cmd_benchmark(bench_data, bench_flags, bench_methods, seed, bench_out);
        if (probe->parsed())
            return cmd_scaling_probe(probe_data, probe_flags, probe_sizes, probe_repeats,
                                     probe_timeout, seed, probe_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
