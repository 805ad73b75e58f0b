#include "aer/ensemble.hpp"

#include "aer/common.hpp"
#include "aer/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace aer {

namespace {

constexpr char kStage[] = "ensemble";
constexpr double kProbClamp = 1e-12;

[[noreturn]] void fail(const std::string& message) { throw StageError(kStage, message); }

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

}  // namespace

Eigen::VectorXd init_weights(const Eigen::VectorXd& aic_per_classifier,
                             const Eigen::VectorXd& bic_per_classifier, double blend) {
    if (aic_per_classifier.size() != bic_per_classifier.size())
        fail("AIC and BIC vectors must have equal length");
    if (aic_per_classifier.size() == 0) fail("empty criterion vectors");
    if (blend < 0.0 || blend > 1.0) fail("blend must lie in [0, 1]");

    Eigen::VectorXd blended =
        blend * aic_per_classifier + (1.0 - blend) * bic_per_classifier;
    if (!blended.allFinite()) fail("non-finite information criteria");
    double lo = blended.minCoeff();
    if (lo <= 0.0) blended.array() += 1.0 - lo;  // order-preserving shift into (0, inf)

    Eigen::VectorXd reciprocal = blended.cwiseInverse();
    return reciprocal / reciprocal.sum();
}

double cross_entropy_loss(const Eigen::VectorXd& weights, const Eigen::MatrixXd& outputs,
                          const std::vector<int>& labels) {
    if (outputs.cols() != weights.size()) fail("weight length does not match classifier count");
    if (outputs.rows() != static_cast<Eigen::Index>(labels.size()))
        fail("labels length does not match outputs");
    Eigen::VectorXd combined = outputs * weights;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < combined.size(); ++i) {
        double p = clamp_prob(combined[i]);
        loss -= labels[static_cast<std::size_t>(i)] == 1 ? std::log(p) : std::log(1.0 - p);
    }
    return loss;
}

Eigen::VectorXd loss_gradient(const Eigen::VectorXd& weights, const Eigen::MatrixXd& outputs,
                              const std::vector<int>& labels) {
    if (outputs.cols() != weights.size()) fail("weight length does not match classifier count");
    if (outputs.rows() != static_cast<Eigen::Index>(labels.size()))
        fail("labels length does not match outputs");
    Eigen::VectorXd combined = outputs * weights;
    Eigen::VectorXd factors(combined.size());
    for (Eigen::Index i = 0; i < combined.size(); ++i) {
        double p = clamp_prob(combined[i]);
        double y = labels[static_cast<std::size_t>(i)];
        factors[i] = 1.0 / ((1.0 - y) - p);
    }
    return outputs.transpose() * factors;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    Eigen::VectorXd clamped = v.cwiseMax(0.0).cwiseMin(1.0);
    double total = clamped.sum();
    if (total <= 0.0) fail("projection degenerate: all weights clamped to zero");
    return clamped / total;
}

SgdResult sgd_train(const Eigen::MatrixXd& outputs, const std::vector<int>& labels,
                    const Eigen::VectorXd& init, const SgdConfig& cfg,
                    std::vector<Eigen::VectorXd>* step_trace) {
    if (cfg.learning_rate <= 0.0) fail("learning_rate must be positive");
    if (cfg.batch_size < 1) fail("batch_size must be at least 1");
    if (cfg.max_steps < 0) fail("max_steps must be non-negative");

    SgdResult result;
    result.weights = init;
    result.loss_trace.push_back(cross_entropy_loss(init, outputs, labels));
    if (init.size() == 1) {
        // Simplex of dimension zero: the single weight stays 1.
        result.weights[0] = 1.0;
        return result;
    }

    std::mt19937_64 rng(derive_seed(cfg.seed, "sgd-train"));
    std::uniform_int_distribution<Eigen::Index> pick(0, outputs.rows() - 1);

    Eigen::VectorXd w = init;
    Eigen::VectorXd best_w = init;
    double best_loss = result.loss_trace.front();
    double prev_loss = best_loss;

    Eigen::MatrixXd batch(cfg.batch_size, outputs.cols());
    std::vector<int> batch_labels(static_cast<std::size_t>(cfg.batch_size));

    for (int step = 0; step < cfg.max_steps; ++step) {
        for (int b = 0; b < cfg.batch_size; ++b) {
            Eigen::Index row = pick(rng);
            batch.row(b) = outputs.row(row);
            batch_labels[static_cast<std::size_t>(b)] = labels[static_cast<std::size_t>(row)];
        }
        Eigen::VectorXd grad = loss_gradient(w, batch, batch_labels);
        double norm = grad.norm();
        double rate = norm > 0.0 ? std::min(cfg.learning_rate, 1.0 / norm) : cfg.learning_rate;
        // Clamped instances can saturate the gradient so hard that the capped
        // step still leaves every coordinate non-positive; halve until the
        // projection is feasible. w itself is feasible, so this terminates.
        Eigen::VectorXd candidate = w - rate * grad;
        for (int halving = 0; halving < 60 && candidate.maxCoeff() <= 0.0; ++halving) {
            rate *= 0.5;
            candidate = w - rate * grad;
        }
        w = project_to_simplex(candidate);
        if (step_trace) step_trace->push_back(w);

        double loss = cross_entropy_loss(w, outputs, labels);
        result.loss_trace.push_back(loss);
        if (loss < best_loss) {
            best_loss = loss;
            best_w = w;
        }
        double rel = std::abs(loss - prev_loss) / (std::abs(prev_loss) + 1e-12);
        prev_loss = loss;
        if (rel <= cfg.tol) break;
    }
    result.weights = best_w;
    return result;
}

namespace {

// Shared by the single-point and batch entry points: turns an m x L matrix of
// per-component log-densities into m x 2L normalized dynamic weights.
Eigen::MatrixXd normalize_dynamic(const Eigen::MatrixXd& log_dens, LikelihoodMode mode,
                                  bool shifted_log) {
    const Eigen::Index m = log_dens.rows();
    const Eigen::Index L = log_dens.cols();
    Eigen::MatrixXd half(m, L);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (mode == LikelihoodMode::Exp) {
            // Log-space shift: invariant to adding a constant to the log-densities.
            double hi = log_dens.row(i).maxCoeff();
            half.row(i) = (log_dens.row(i).array() - hi).exp();
        } else if (shifted_log) {
            double hi = log_dens.row(i).maxCoeff();
            half.row(i) = log_dens.row(i).array() - hi;
        } else {
            half.row(i) = log_dens.row(i);
        }
    }
    Eigen::MatrixXd dynamic(m, 2 * L);
    dynamic << half, half;  // component l serves classifiers l and l + L
    for (Eigen::Index i = 0; i < m; ++i) {
        double total = dynamic.row(i).sum();
        double scale = dynamic.row(i).cwiseAbs().maxCoeff();
        if (std::abs(total) <= 1e-12 * std::max(1.0, scale)) {
            // Degenerate normalizer (possible in the literal log form); fall
            // back to uniform credit.
            dynamic.row(i).setConstant(1.0 / static_cast<double>(2 * L));
        } else {
            dynamic.row(i) /= total;
        }
    }
    return dynamic;
}

}  // namespace

Eigen::MatrixXd likelihood_weight_matrix(const GmmModel& gmm, const Eigen::MatrixXd& X,
                                         LikelihoodMode mode, bool shifted_log) {
    return normalize_dynamic(component_log_density_matrix(gmm, X), mode, shifted_log);
}

Eigen::VectorXd likelihood_weights(const GmmModel& gmm, const Eigen::VectorXd& x,
                                   LikelihoodMode mode, bool shifted_log) {
    Eigen::MatrixXd row = likelihood_weight_matrix(gmm, x.transpose(), mode, shifted_log);
    return row.row(0).transpose();
}

Eigen::VectorXd interpolate_weights(const Eigen::VectorXd& dynamic_weights,
                                    const Eigen::VectorXd& trained_weights, double lambda) {
    if (dynamic_weights.size() != trained_weights.size())
        fail("weight vectors must have equal length");
    if (lambda < 0.0 || lambda > 1.0) fail("lambda must lie in [0, 1]");
    return lambda * dynamic_weights + (1.0 - lambda) * trained_weights;
}

Eigen::MatrixXd classifier_outputs(const std::vector<BoostedModel>& classifiers,
                                   const Eigen::MatrixXd& X, bool soft) {
    if (classifiers.empty()) fail("no classifiers");
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(classifiers.size()));
    for (std::size_t c = 0; c < classifiers.size(); ++c) {
        if (soft) {
            out.col(static_cast<Eigen::Index>(c)) = classifiers[c].predict_scores(X);
        } else {
            std::vector<int> labels = classifiers[c].predict_labels(X);
            for (Eigen::Index i = 0; i < X.rows(); ++i)
                out(i, static_cast<Eigen::Index>(c)) = labels[static_cast<std::size_t>(i)];
        }
    }
    return out;
}

AerModel::Prediction AerModel::predict(const Eigen::MatrixXd& X) const {
    const Eigen::MatrixXd& input = X;
    Eigen::MatrixXd standardized;
    const Eigen::MatrixXd* use = &input;
    if (standardizer) {
        standardized = standardizer->apply(X);
        use = &standardized;
    }
    Eigen::MatrixXd outputs = classifier_outputs(classifiers, *use, soft_outputs);
    Eigen::MatrixXd dynamic = likelihood_weight_matrix(gmm, *use, mode, shifted_log);

    Prediction pred;
    pred.scores.resize(X.rows());
    pred.labels.resize(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Eigen::VectorXd combined = interpolate_weights(dynamic.row(i).transpose(), weights,
                                                       interpolation);
        double score = combined.dot(outputs.row(i).transpose());
        pred.scores[i] = score;
        pred.labels[static_cast<std::size_t>(i)] = score >= threshold ? 1 : 0;
    }
    return pred;
}

GridSearchResult grid_search_lambda_delta(const Eigen::MatrixXd& val_outputs,
                                          const Eigen::MatrixXd& val_dynamic_weights,
                                          const Eigen::VectorXd& trained_weights,
                                          const std::vector<int>& val_labels,
                                          std::optional<double> fixed_lambda) {
    const Eigen::Index m = val_outputs.rows();
    if (m == 0) fail("empty validation set");
    bool has_minority = false, has_majority = false;
    for (int y : val_labels) (y == 1 ? has_minority : has_majority) = true;
    if (!has_minority || !has_majority) fail("validation set must contain both classes");

    // score_i(lambda) = lambda * a_i + (1 - lambda) * b_i
    Eigen::VectorXd dynamic_scores(m), trained_scores(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        dynamic_scores[i] = val_dynamic_weights.row(i).dot(val_outputs.row(i));
        trained_scores[i] = trained_weights.dot(val_outputs.row(i).transpose());
    }

    std::vector<double> lambda_grid;
    if (fixed_lambda) {
        lambda_grid.push_back(*fixed_lambda);
    } else {
        for (int k = 0; k <= 20; ++k) lambda_grid.push_back(k * 0.05);
    }
    std::vector<double> delta_grid;
    for (int k = 1; k <= 39; ++k) delta_grid.push_back(k * 0.025);

    GridSearchResult result;
    result.lambda_grid = lambda_grid;
    result.lambda_curve.assign(lambda_grid.size(), 0.0);
    double best_ba = -1.0;

    for (std::size_t li = 0; li < lambda_grid.size(); ++li) {
        double lambda = lambda_grid[li];
        Eigen::VectorXd scores = lambda * dynamic_scores + (1.0 - lambda) * trained_scores;
        double lambda_best = -1.0;
        for (double delta : delta_grid) {
            std::int64_t tp = 0, fn = 0, tn = 0, fp = 0;
            for (Eigen::Index i = 0; i < m; ++i) {
                int predicted = scores[i] >= delta ? 1 : 0;
                if (val_labels[static_cast<std::size_t>(i)] == 1)
                    predicted == 1 ? ++tp : ++fn;
                else
                    predicted == 1 ? ++fp : ++tn;
            }
            double ba = 0.5 * (static_cast<double>(tp) / static_cast<double>(tp + fn) +
                               static_cast<double>(tn) / static_cast<double>(tn + fp));
            lambda_best = std::max(lambda_best, ba);
            bool better = ba > best_ba;
            bool tie = ba == best_ba &&
                       (std::abs(lambda - 0.5) < std::abs(result.lambda - 0.5) ||
                        (std::abs(lambda - 0.5) == std::abs(result.lambda - 0.5) &&
                         std::abs(delta - 0.5) < std::abs(result.delta - 0.5)));
            if (better || tie) {
                best_ba = ba;
                result.lambda = lambda;
                result.delta = delta;
            }
        }
        result.lambda_curve[li] = lambda_best;
    }
    result.balanced_accuracy = best_ba;
    return result;
}

AerPipeline fit_aer_pipeline(const Dataset& train, const AerFitConfig& cfg,
                             std::optional<Standardizer> standardizer) {
    if (train.minority_count() == 0 || train.majority_count() == 0)
        fail("training data must contain both classes");

    AerPipeline pipe;
    pipe.soft_outputs = cfg.soft_outputs;
    pipe.standardizer = standardizer;

    Dataset working = train;
    if (standardizer) working.features = standardizer->apply(train.features);

    // Majority-class mixture and component-count selection.
    std::vector<int> majority = working.majority_indices();
    Eigen::MatrixXd majority_rows(static_cast<Eigen::Index>(majority.size()),
                                  working.feature_count());
    for (std::size_t i = 0; i < majority.size(); ++i)
        majority_rows.row(static_cast<Eigen::Index>(i)) = working.features.row(majority[i]);

    GmmFitConfig gmm_cfg = cfg.gmm;
    gmm_cfg.seed = derive_seed(cfg.seed, "gmm-fit");
    pipe.gmm = stage("gmm-selection", [&] {
        return select_components(majority_rows, cfg.component_candidates, gmm_cfg);
    });
    const int L = pipe.gmm.component_count();

    // 2L subsets: type-A (Tomek-cleaned) then type-B.
    stage("subset-construction", [&] {
        for (int l = 0; l < L; ++l) pipe.plans.push_back(make_type_a(working, pipe.gmm, l));
        for (int l = 0; l < L; ++l)
            pipe.plans.push_back(make_type_b(working, pipe.gmm, l,
                                             derive_seed(cfg.seed, "type-b-" + std::to_string(l))));
        for (int l = 0; l < L; ++l) {
            Dataset subset = materialize(working, pipe.plans[static_cast<std::size_t>(l)]);
            TomekReport report = tomek_remove(subset);
            auto& plan = pipe.plans[static_cast<std::size_t>(l)];
            // Removed rows index the subset; majority rows come first there.
            std::vector<int> kept;
            std::size_t cursor = 0;
            for (std::size_t i = 0; i < plan.majority_indices.size(); ++i) {
                if (cursor < report.removed_majority_indices.size() &&
                    report.removed_majority_indices[cursor] == static_cast<int>(i)) {
                    ++cursor;
                    continue;
                }
                kept.push_back(plan.majority_indices[i]);
            }
            plan.majority_indices = std::move(kept);
            pipe.tomek.push_back(std::move(report));
        }
        return 0;
    });

    // One boosted classifier per subset.
    stage("base-classifier-training", [&] {
        for (std::size_t p = 0; p < pipe.plans.size(); ++p) {
            Dataset subset = materialize(working, pipe.plans[p]);
            GbmConfig gbm_cfg = cfg.gbm;
            gbm_cfg.seed = derive_seed(cfg.seed, "gbm-" + std::to_string(p));
            pipe.classifiers.push_back(fit_gbm(subset.features, subset.labels, gbm_cfg));
        }
        return 0;
    });

    // Per-classifier information criteria: the generating component's fit to
    // the subset's majority rows.
    stage("weight-initialization", [&] {
        const Eigen::Index n = working.feature_count();
        double cov_params = cfg.gmm.covariance_mode == CovarianceMode::Full
                                ? static_cast<double>(n) * (n + 1) / 2.0
                                : static_cast<double>(n);
        double k = static_cast<double>(n) + cov_params;
        pipe.aic_per_classifier.resize(static_cast<Eigen::Index>(pipe.plans.size()));
        pipe.bic_per_classifier.resize(static_cast<Eigen::Index>(pipe.plans.size()));
        for (std::size_t p = 0; p < pipe.plans.size(); ++p) {
            const auto& plan = pipe.plans[p];
            double ll = 0.0;
            for (int row : plan.majority_indices)
                ll += component_log_density(pipe.gmm, plan.component_index,
                                            working.features.row(row).transpose());
            double m_subset = std::max<double>(1.0, static_cast<double>(plan.majority_indices.size()));
            pipe.aic_per_classifier[static_cast<Eigen::Index>(p)] = 2.0 * k - 2.0 * ll;
            pipe.bic_per_classifier[static_cast<Eigen::Index>(p)] =
                std::log(m_subset) * k - 2.0 * ll;
        }
        pipe.initial_weights =
            init_weights(pipe.aic_per_classifier, pipe.bic_per_classifier, cfg.sgd.aic_bic_blend);
        return 0;
    });

    stage("sgd-training", [&] {
        Eigen::MatrixXd outputs =
            classifier_outputs(pipe.classifiers, working.features, cfg.soft_outputs);
        SgdConfig sgd_cfg = cfg.sgd;
        sgd_cfg.seed = derive_seed(cfg.seed, "sgd");
        SgdResult sgd = sgd_train(outputs, working.labels, pipe.initial_weights, sgd_cfg);
        pipe.trained_weights = std::move(sgd.weights);
        pipe.sgd_loss_trace = std::move(sgd.loss_trace);
        return 0;
    });

    return pipe;
}

AerFitResult finalize_aer(const AerPipeline& pipeline, const Dataset& validation,
                          const AerFitConfig& cfg, std::optional<double> fixed_lambda,
                          bool use_trained_weights) {
    if (validation.minority_count() == 0 || validation.majority_count() == 0)
        fail("validation set must contain both classes");

    Eigen::MatrixXd val_features = validation.features;
    if (pipeline.standardizer) val_features = pipeline.standardizer->apply(val_features);

    const Eigen::VectorXd& w =
        use_trained_weights ? pipeline.trained_weights : pipeline.initial_weights;

    GridSearchResult grid = stage("grid-search", [&] {
        Eigen::MatrixXd outputs =
            classifier_outputs(pipeline.classifiers, val_features, pipeline.soft_outputs);
        Eigen::MatrixXd dynamic =
            likelihood_weight_matrix(pipeline.gmm, val_features, cfg.mode, cfg.shifted_log);
        return grid_search_lambda_delta(outputs, dynamic, w, validation.labels, fixed_lambda);
    });

    AerFitResult result;
    result.model.gmm = pipeline.gmm;
    result.model.classifiers = pipeline.classifiers;
    result.model.weights = w;
    result.model.interpolation = grid.lambda;
    result.model.threshold = grid.delta;
    result.model.mode = cfg.mode;
    result.model.shifted_log = cfg.shifted_log;
    result.model.soft_outputs = pipeline.soft_outputs;
    result.model.standardizer = pipeline.standardizer;
    result.grid = std::move(grid);
    result.sgd_loss_trace = pipeline.sgd_loss_trace;
    return result;
}

AerFitResult fit_aer(const Dataset& train, const Dataset& validation, const AerFitConfig& cfg,
                     std::optional<Standardizer> standardizer) {
    AerPipeline pipeline = fit_aer_pipeline(train, cfg, std::move(standardizer));
    return finalize_aer(pipeline, validation, cfg);
}

nlohmann::json aer_model_to_json(const AerModel& model) {
    nlohmann::json classifiers = nlohmann::json::array();
    for (const auto& c : model.classifiers) classifiers.push_back(gbm_to_json(c));
    nlohmann::json j{
        {"format_version", 1},
        {"mode", model.mode == LikelihoodMode::Log ? "log" : "exp"},
        {"shifted_log", model.shifted_log},
        {"soft_outputs", model.soft_outputs},
        {"lambda", model.interpolation},
        {"delta", model.threshold},
        {"weights",
         std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size())},
        {"gmm", gmm_to_json(model.gmm)},
        {"classifiers", std::move(classifiers)}};
    if (model.standardizer) {
        j["standardizer"] = {
            {"mean", std::vector<double>(model.standardizer->mean.data(),
                                         model.standardizer->mean.data() +
                                             model.standardizer->mean.size())},
            {"stddev", std::vector<double>(model.standardizer->stddev.data(),
                                           model.standardizer->stddev.data() +
                                               model.standardizer->stddev.size())}};
    }
    return j;
}

AerModel aer_model_from_json(const nlohmann::json& j) {
    int version = j.at("format_version").get<int>();
    if (version != 1) fail("unsupported model format version " + std::to_string(version));
    AerModel model;
    std::string mode = j.at("mode").get<std::string>();
    if (mode == "log")
        model.mode = LikelihoodMode::Log;
    else if (mode == "exp")
        model.mode = LikelihoodMode::Exp;
    else
        fail("unknown likelihood mode: " + mode);
    model.shifted_log = j.at("shifted_log").get<bool>();
    model.soft_outputs = j.at("soft_outputs").get<bool>();
    model.interpolation = j.at("lambda").get<double>();
    model.threshold = j.at("delta").get<double>();
    auto weights = j.at("weights").get<std::vector<double>>();
    model.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(),
                                                      static_cast<Eigen::Index>(weights.size()));
    model.gmm = gmm_from_json(j.at("gmm"));
    for (const auto& jc : j.at("classifiers")) model.classifiers.push_back(gbm_from_json(jc));
    if (model.classifiers.size() != 2 * model.gmm.components.size())
        fail("classifier count must be twice the component count");
    if (j.contains("standardizer")) {
        Standardizer s;
        auto mean = j.at("standardizer").at("mean").get<std::vector<double>>();
        auto stddev = j.at("standardizer").at("stddev").get<std::vector<double>>();
        s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(),
                                                   static_cast<Eigen::Index>(mean.size()));
        s.stddev = Eigen::Map<const Eigen::VectorXd>(stddev.data(),
                                                     static_cast<Eigen::Index>(stddev.size()));
        model.standardizer = std::move(s);
    }
    return model;
}

}  // namespace aer
