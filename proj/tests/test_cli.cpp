#include "aer/bench.hpp"
#include "aer/dataset.hpp"
#include "aer/ensemble.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>

// End-to-end checks through the built binary (path injected by CMake).

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    fs::path out = fs::temp_directory_path() / "aer_cli_out.txt";
    std::string command = std::string(AER_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
    int status = std::system(command.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    result.output = ss.str();
    return result;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / name; }

}  // namespace

TEST_CASE("cli gen-data: summary counts and byte-identical reruns") {
    auto csv = tmp("cli_gen.csv");
    CliResult r = run_cli("gen-data --samples 400 --ratio 7 --centers 2 --seed 11 --out " +
                          csv.string());
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("m=400") != std::string::npos);
    CHECK(r.output.find("m_k=50") != std::string::npos);
    std::string first = read_file(csv);

    CliResult again = run_cli("gen-data --samples 400 --ratio 7 --centers 2 --seed 11 --out " +
                              csv.string());
    REQUIRE(again.exit_code == 0);
    CHECK(read_file(csv) == first);

    auto tiny = tmp("cli_tiny.csv");
    CliResult four = run_cli("gen-data --samples 4 --ratio 1 --centers 1 --seed 3 --out " +
                             tiny.string());
    REQUIRE(four.exit_code == 0);
    aer::Dataset d = aer::load_csv(tiny.string(), std::string("label"));
    CHECK(d.row_count() == 4);
    CHECK(d.minority_count() == 2);
}

TEST_CASE("cli fit: rejects two data sources with a config error") {
    auto csv = tmp("cli_gen.csv");
    CliResult r = run_cli("fit --data " + csv.string() + " --synthetic --seed 1 --out " +
                          tmp("never.json").string());
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("one data source") != std::string::npos);
}

TEST_CASE("cli fit: tiny run produces a 2-classifier model; refits are byte-identical") {
    auto csv = tmp("cli_fit_data.csv");
    REQUIRE(run_cli("gen-data --samples 300 --ratio 4 --centers 1 --n-features 4 "
                    "--n-informative 4 --seed 21 --out " +
                    csv.string())
                .exit_code == 0);
    auto model_path = tmp("cli_model.json");
    std::string fit_args = "fit --data " + csv.string() +
                           " --candidates 1 --gmm-restarts 2 --rounds 4 --sgd-steps 100 "
                           "--seed 21 --out " +
                           model_path.string();
    CliResult r = run_cli(fit_args);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("selected L = 1") != std::string::npos);
    // fit log carries the selection summary and the SGD loss trace
    std::string fitlog = read_file(fs::path(model_path.string() + ".fitlog"));
    CHECK(fitlog.find("selected_L = 1") != std::string::npos);
    CHECK(fitlog.find("sgd_loss_trace:") != std::string::npos);
    std::string first = read_file(model_path);
    json model = json::parse(first);
    CHECK(model["format_version"] == 1);
    CHECK(model["classifiers"].size() == 2);
    CHECK(model["weights"].size() == 2);

    REQUIRE(run_cli(fit_args).exit_code == 0);
    CHECK(read_file(model_path) == first);
}

TEST_CASE("cli evaluate: memorizable data scores balanced accuracy 1.0") {
    // Two far-apart blobs: any sane fit memorizes the whole file.
    std::mt19937_64 rng(31);
    std::normal_distribution<double> noise(0.0, 0.5);
    Eigen::MatrixXd x(120, 2);
    std::vector<int> y(120, 0);
    for (int i = 0; i < 90; ++i) {
        x(i, 0) = -8.0 + noise(rng);
        x(i, 1) = noise(rng);
    }
    for (int i = 90; i < 120; ++i) {
        x(i, 0) = 8.0 + noise(rng);
        x(i, 1) = noise(rng);
        y[static_cast<std::size_t>(i)] = 1;
    }
    auto csv = tmp("cli_easy.csv");
    aer::save_csv(aer::Dataset::from(x, y), csv.string());

    auto model_path = tmp("cli_easy_model.json");
    REQUIRE(run_cli("fit --data " + csv.string() +
                    " --candidates 1 --gmm-restarts 2 --rounds 10 --depth 3 --sgd-steps 100 "
                    "--seed 31 --out " +
                    model_path.string())
                .exit_code == 0);
    CliResult r = run_cli("evaluate --model " + model_path.string() + " --data " + csv.string());
    REQUIRE(r.exit_code == 0);
    json report = json::parse(r.output);
    CHECK(report["metrics"]["balanced_accuracy"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("cli evaluate: all-majority dummy model scores balanced accuracy 0.5") {
    // Hand-built model whose classifiers always answer 0.
    aer::GmmModel gmm;
    aer::GaussianComponent comp;
    comp.weight = 1.0;
    comp.mean = Eigen::VectorXd::Zero(2);
    comp.covariance = Eigen::MatrixXd::Identity(2, 2);
    gmm.components.push_back(comp);

    aer::BoostedModel zero;
    zero.base_score = -50.0;
    zero.n_features = 2;

    aer::AerModel dummy;
    dummy.gmm = gmm;
    dummy.classifiers = {zero, zero};
    dummy.weights = Eigen::VectorXd::Constant(2, 0.5);
    dummy.interpolation = 0.0;
    dummy.threshold = 0.5;
    dummy.mode = aer::LikelihoodMode::Exp;

    auto model_path = tmp("cli_dummy_model.json");
    std::ofstream out(model_path);
    out << aer::aer_model_to_json(dummy).dump(2);
    out.close();

    auto csv = tmp("cli_dummy_data.csv");
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(40, 2);
    std::vector<int> y(40, 0);
    for (int i = 30; i < 40; ++i) y[static_cast<std::size_t>(i)] = 1;
    aer::save_csv(aer::Dataset::from(x, y), csv.string());

    CliResult r = run_cli("evaluate --model " + model_path.string() + " --data " + csv.string());
    REQUIRE(r.exit_code == 0);
    json report = json::parse(r.output);
    CHECK(report["metrics"]["balanced_accuracy"].get<double>() == doctest::Approx(0.5));
    CHECK(report["confusion"]["tp"] == 0);
}

TEST_CASE("cli evaluate: dimension mismatch is a named failure") {
    auto model_path = tmp("cli_dummy_model.json");  // 2-feature dummy from above
    auto csv = tmp("cli_wrong_dims.csv");
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(20, 5);
    std::vector<int> y(20, 0);
    y[0] = y[1] = 1;
    aer::save_csv(aer::Dataset::from(x, y), csv.string());
    CliResult r = run_cli("evaluate --model " + model_path.string() + " --data " + csv.string());
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("dimension mismatch") != std::string::npos);
}

TEST_CASE("cli benchmark: method filtering, config echo, report round-trip") {
    auto csv = tmp("cli_bench_data.csv");
    REQUIRE(run_cli("gen-data --samples 600 --ratio 9 --centers 2 --seed 41 --out " +
                    csv.string())
                .exit_code == 0);
    auto report_path = tmp("cli_bench.json");
    CliResult r = run_cli("benchmark --data " + csv.string() +
                          " --methods aer-exp --candidates 2 --gmm-restarts 2 --rounds 4 "
                          "--sgd-steps 100 --seed 41 --out " +
                          report_path.string());
    REQUIRE(r.exit_code == 0);

    json report = json::parse(read_file(report_path));
    CHECK(report["format_version"] == 1);
    // exactly the requested method plus the always-present baseline
    CHECK(report["methods"].size() == 2);
    CHECK(report["methods"].contains("aer-exp"));
    CHECK(report["methods"].contains("gbm"));
    // config echo includes resolved defaults that were never passed as flags
    CHECK(report["config"]["fit"]["sgd"]["batch_size"] == 32);
    CHECK(report["config"]["fit"]["gmm"]["n_restarts"] == 2);
    CHECK(report["config"]["split"]["train_frac"].get<double>() == doctest::Approx(0.6));
    // significance tests for the aer-vs-baseline pair, one row per test
    REQUIRE(report["tests"].size() == 2);
    CHECK(report["tests"][0]["method"] == "aer-exp");
    CHECK(report["tests"][0]["baseline"] == "gbm");
    CHECK(report["tests"][0]["test"] == "mcnemar");
    CHECK(report["tests"][1]["test"] == "wilcoxon");
    for (const auto& row : report["tests"]) {
        CHECK(row.contains("statistic"));
        CHECK(row.contains("p_value"));
        CHECK(row.contains("reject"));
    }
    // parse(emit(report)) == report
    CHECK(json::parse(report.dump()) == report);
}

TEST_CASE("cli scaling-probe: structural CSV output") {
    auto out_path = tmp("cli_probe.csv");
    CliResult r = run_cli("scaling-probe --sizes 200,300 --ratio 4 --centers 1 "
                          "--n-features 3 --n-informative 3 --candidates 1 --gmm-restarts 1 "
                          "--rounds 2 --sgd-steps 30 --repeats 1 --seed 51 --out " +
                          out_path.string());
    REQUIRE(r.exit_code == 0);
    std::string csv = read_file(out_path);
    CHECK(csv.find("m,t_aer_seconds,t_full_seconds") == 0);
    int lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == 3);  // header + one row per size
    CHECK(csv.find("200,") != std::string::npos);
    CHECK(csv.find("300,") != std::string::npos);
}

TEST_CASE("cli scaling-probe: timed-out cells render as empty fields") {
    auto out_path = tmp("cli_probe_timeout.csv");
    CliResult r = run_cli("scaling-probe --sizes 200 --ratio 4 --centers 1 "
                          "--n-features 3 --n-informative 3 --candidates 1 --gmm-restarts 1 "
                          "--rounds 2 --sgd-steps 30 --repeats 1 --timeout-seconds 0 "
                          "--seed 51 --out " +
                          out_path.string());
    REQUIRE(r.exit_code == 0);
    std::string csv = read_file(out_path);
    CHECK(csv.find("200,,\n") != std::string::npos);  // both cells skipped
}

TEST_CASE("cli evaluate: re-evaluating the same model and data is identical") {
    auto model_path = tmp("cli_easy_model.json");  // produced by the memorization case
    auto csv = tmp("cli_easy.csv");
    CliResult a = run_cli("evaluate --model " + model_path.string() + " --data " + csv.string());
    CliResult b = run_cli("evaluate --model " + model_path.string() + " --data " + csv.string());
    REQUIRE(a.exit_code == 0);
    CHECK(a.output == b.output);
}

TEST_CASE("cli fit: standardizer and diagonal covariance survive the model round-trip") {
    auto csv = tmp("cli_easy.csv");  // blobs written by the memorization case
    auto model_path = tmp("cli_std_model.json");
    REQUIRE(run_cli("fit --data " + csv.string() +
                    " --candidates 1 --gmm-restarts 2 --covariance diagonal --standardize "
                    "--rounds 10 --depth 3 --sgd-steps 100 --seed 71 --out " +
                    model_path.string())
                .exit_code == 0);
    json model = json::parse(read_file(model_path));
    CHECK(model.contains("standardizer"));
    CHECK(model["gmm"]["covariance_mode"] == "diagonal");
    CliResult r = run_cli("evaluate --model " + model_path.string() + " --data " + csv.string());
    REQUIRE(r.exit_code == 0);
    json report = json::parse(r.output);
    CHECK(report["metrics"]["balanced_accuracy"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("cli: config file values are read and flags override them") {
    auto csv = tmp("cli_cfg_data.csv");
    REQUIRE(run_cli("gen-data --samples 300 --ratio 4 --centers 1 --seed 61 --out " +
                    csv.string())
                .exit_code == 0);
    auto cfg_path = tmp("cli_run.ini");
    {
        std::ofstream cfg(cfg_path);
        cfg << "seed=61\n[benchmark]\ndata=" << csv.string()
            << "\ncandidates=1\ngmm-restarts=2\nrounds=3\nsgd-steps=50\nmethods=aer-exp\n";
    }
    auto report_path = tmp("cli_cfg_bench.json");
    CliResult r = run_cli("benchmark --config " + cfg_path.string() + " --rounds 5 --out " +
                          report_path.string());
    REQUIRE(r.exit_code == 0);
    json report = json::parse(read_file(report_path));
    CHECK(report["config"]["fit"]["gbm"]["n_rounds"] == 5);  // flag beat the file
    CHECK(report["config"]["seed"] == 61);
    CHECK(report["config"]["fit"]["component_candidates"][0] == 1);
}
