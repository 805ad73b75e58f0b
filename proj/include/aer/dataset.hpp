#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace aer {

// Binary labeled feature matrix. Label 1 is always the minority (positive)
// class, 0 the majority; the remap happens at load time.
struct Dataset {
    Eigen::MatrixXd features;  // m x n
    std::vector<int> labels;   // values in {0, 1}

    Eigen::Index row_count() const { return features.rows(); }
    Eigen::Index feature_count() const { return features.cols(); }
    Eigen::Index minority_count() const { return minority_; }
    Eigen::Index majority_count() const { return majority_; }

    // Validates shapes, label values, finiteness, and caches class counts.
    static Dataset from(Eigen::MatrixXd features, std::vector<int> labels);

    // Row subset in the given order.
    Dataset select_rows(const std::vector<int>& rows) const;

    std::vector<int> minority_indices() const;
    std::vector<int> majority_indices() const;

private:
    Eigen::Index minority_ = 0;
    Eigen::Index majority_ = 0;
};

struct SplitSpec {
    double train_frac = 0.6;
    double val_frac = 0.2;
    double test_frac = 0.2;
    std::uint64_t seed = 0;
};

struct SplitResult {
    Dataset train;
    Dataset validation;
    Dataset test;
};

struct SyntheticSpec {
    int total_samples = 8000;
    double imbalance_ratio = 79.0;  // majority instances per minority instance
    int centers_per_class = 9;
    int n_features = 20;
    int n_informative = 10;
    std::uint64_t seed = 0;
};

// Feature z-scoring fitted on training data and replayed on later splits.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;  // floored at a small positive value

    static Standardizer fit(const Eigen::MatrixXd& features);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& features) const;
};

using LabelColumn = std::variant<int, std::string>;

struct CsvOptions {
    bool has_header = true;
};

// RFC-4180-style reader. The label column must hold exactly two distinct raw
// values; the rarer one maps to 1 (ties resolve to the lexicographically
// smaller raw value). Feature cells must parse as decimal floats.
Dataset load_csv(const std::string& path, const LabelColumn& label_column,
                 const CsvOptions& options = {});

// Writes header f0..f{n-1},label and one row per sample.
void save_csv(const Dataset& data, const std::string& path);

// Stratified three-way split with largest-remainder per-class rounding.
// Membership is random under the seed; each split keeps original row order.
SplitResult stratified_split(const Dataset& data, const SplitSpec& spec);

// Samples each class from its own randomly placed Gaussian mixture
// (centers uniform in [-5,5]^n_informative, unit spherical covariance);
// the remaining features are class-independent standard normal noise.
// Minority count is exactly floor(total / (R + 1)).
Dataset generate_gmm_data(const SyntheticSpec& spec);

}  // namespace aer
