#include "aer/gmm.hpp"

#include "aer/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace aer {

namespace {

constexpr char kStage[] = "gmm";

[[noreturn]] void fail(const std::string& message) { throw StageError(kStage, message); }

// Cholesky factor plus the constant part of the Gaussian log-density.
struct ComponentFactor {
    Eigen::MatrixXd chol_lower;  // L with Sigma = L L^T
    double log_norm;             // -0.5 (n log 2pi + log det Sigma)
};

ComponentFactor factor_component(const GaussianComponent& c) {
    Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
    if (llt.info() != Eigen::Success)
        fail("covariance not positive-definite (degenerate data with variance floor disabled?)");
    ComponentFactor f;
    f.chol_lower = llt.matrixL();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < f.chol_lower.rows(); ++i)
        log_det += 2.0 * std::log(f.chol_lower(i, i));
    f.log_norm = -0.5 * (static_cast<double>(c.mean.size()) * std::log(2.0 * std::numbers::pi) +
                         log_det);
    return f;
}

// Column of log N(x_i | mu, Sigma) for all rows of X at once.
Eigen::VectorXd log_density_column(const GaussianComponent& c, const ComponentFactor& f,
                                   const Eigen::MatrixXd& X) {
    Eigen::MatrixXd centered = (X.rowwise() - c.mean.transpose()).transpose();  // n x m
    f.chol_lower.triangularView<Eigen::Lower>().solveInPlace(centered);
    Eigen::VectorXd quad = centered.colwise().squaredNorm().transpose();
    return (-0.5 * quad.array() + f.log_norm).matrix();
}

// Per-dimension variance floor: multiplier * data variance, with an absolute
// fallback for constant dimensions so duplicated points stay non-singular.
Eigen::VectorXd make_floor(const Eigen::MatrixXd& samples, double multiplier) {
    Eigen::VectorXd var = (samples.rowwise() - samples.colwise().mean())
                              .array()
                              .square()
                              .colwise()
                              .mean()
                              .matrix()
                              .transpose();
    Eigen::VectorXd floor(var.size());
    for (Eigen::Index j = 0; j < var.size(); ++j)
        floor[j] = var[j] > 0.0 ? multiplier * var[j] : multiplier;
    return floor;
}

void apply_floor(Eigen::MatrixXd& cov, const Eigen::VectorXd& floor) {
    cov.diagonal() += floor;
}

struct EmRun {
    std::vector<GaussianComponent> components;
    std::vector<double> ll_trace;
    double final_ll = -std::numeric_limits<double>::infinity();
};

std::vector<GaussianComponent> init_components(const Eigen::MatrixXd& X, int L,
                                               const Eigen::VectorXd& floor,
                                               CovarianceMode mode, std::uint64_t seed) {
    const Eigen::Index m = X.rows();
    const Eigen::Index n = X.cols();
    std::mt19937_64 rng(seed);

    // k-means++-style seeding: first mean uniform, then proportional to the
    // squared distance to the closest chosen mean.
    std::vector<Eigen::Index> chosen;
    std::uniform_int_distribution<Eigen::Index> uniform_row(0, m - 1);
    chosen.push_back(uniform_row(rng));
    Eigen::VectorXd min_sq = (X.rowwise() - X.row(chosen[0])).rowwise().squaredNorm();
    while (static_cast<int>(chosen.size()) < L) {
        double total = min_sq.sum();
        Eigen::Index pick;
        if (total <= 0.0) {
            pick = uniform_row(rng);
        } else {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            double acc = 0.0;
            pick = m - 1;
            for (Eigen::Index i = 0; i < m; ++i) {
                acc += min_sq[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        chosen.push_back(pick);
        min_sq = min_sq.cwiseMin((X.rowwise() - X.row(pick)).rowwise().squaredNorm());
    }

    // Pooled covariance shared by all components at start.
    Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
    Eigen::MatrixXd pooled;
    if (mode == CovarianceMode::Full) {
        pooled = centered.transpose() * centered / static_cast<double>(m);
    } else {
        pooled = Eigen::MatrixXd::Zero(n, n);
        pooled.diagonal() =
            centered.array().square().colwise().mean().matrix().transpose();
    }
    apply_floor(pooled, floor);

    std::vector<GaussianComponent> comps(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) {
        comps[static_cast<std::size_t>(l)].weight = 1.0 / L;
        comps[static_cast<std::size_t>(l)].mean = X.row(chosen[static_cast<std::size_t>(l)]);
        comps[static_cast<std::size_t>(l)].covariance = pooled;
    }
    return comps;
}

EmRun run_em(const Eigen::MatrixXd& X, int L, const GmmFitConfig& cfg,
             const Eigen::VectorXd& floor, std::uint64_t seed) {
    const Eigen::Index m = X.rows();
    const Eigen::Index n = X.cols();

    EmRun run;
    run.components = init_components(X, L, floor, cfg.covariance_mode, seed);
    std::vector<GaussianComponent> before_update;

    Eigen::MatrixXd log_resp(m, L);
    for (int iter = 0; iter <= cfg.max_iter; ++iter) {
        // E-step in log space.
        for (int l = 0; l < L; ++l) {
            const auto& c = run.components[static_cast<std::size_t>(l)];
            ComponentFactor f = factor_component(c);
            log_resp.col(l) =
                (log_density_column(c, f, X).array() + std::log(c.weight)).matrix();
        }
        Eigen::VectorXd row_lse(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            double hi = log_resp.row(i).maxCoeff();
            row_lse[i] = hi + std::log((log_resp.row(i).array() - hi).exp().sum());
        }
        double ll = row_lse.sum();

        if (!run.ll_trace.empty()) {
            double prev = run.ll_trace.back();
            if (ll < prev - 1e-12) {
                // Ascent guard (the variance floor is not part of the EM
                // objective): revert to the iterate the trace ends at.
                run.components = before_update;
                break;
            }
            run.ll_trace.push_back(ll);
            run.final_ll = ll;
            double denom = std::abs(prev) + 1e-12;
            if (std::abs(ll - prev) / denom <= cfg.tol) break;
        } else {
            run.ll_trace.push_back(ll);
            run.final_ll = ll;
        }
        if (iter == cfg.max_iter) break;

        Eigen::MatrixXd resp = ((log_resp.colwise() - row_lse).array().exp()).matrix();

        // M-step; components with vanishing responsibility keep their params
        // (partial update preserves the EM ascent property).
        before_update = run.components;
        std::vector<GaussianComponent> updated = run.components;
        Eigen::VectorXd resp_total = resp.colwise().sum().transpose();
        for (int l = 0; l < L; ++l) {
            double nl = resp_total[l];
            if (nl < 1e-10) continue;
            auto& c = updated[static_cast<std::size_t>(l)];
            c.weight = nl / static_cast<double>(m);
            c.mean = (resp.col(l).transpose() * X).transpose() / nl;
            Eigen::MatrixXd centered = X.rowwise() - c.mean.transpose();
            if (cfg.covariance_mode == CovarianceMode::Full) {
                c.covariance =
                    centered.transpose() * resp.col(l).asDiagonal() * centered / nl;
            } else {
                c.covariance = Eigen::MatrixXd::Zero(n, n);
                c.covariance.diagonal() =
                    (centered.array().square().colwise() * resp.col(l).array())
                        .colwise()
                        .sum()
                        .matrix()
                        .transpose() /
                    nl;
            }
            apply_floor(c.covariance, floor);
        }
        // Renormalize weights (components skipped above keep stale weights).
        double wsum = 0.0;
        for (const auto& c : updated) wsum += c.weight;
        for (auto& c : updated) c.weight /= wsum;
        run.components = std::move(updated);
    }
    return run;
}

int parameter_count(int L, Eigen::Index n, CovarianceMode mode) {
    long cov = mode == CovarianceMode::Full ? static_cast<long>(n) * (n + 1) / 2
                                            : static_cast<long>(n);
    return static_cast<int>(static_cast<long>(L) * n + static_cast<long>(L) * cov + (L - 1));
}

}  // namespace

GmmModel em_fit(const Eigen::MatrixXd& samples, int n_components, const GmmFitConfig& cfg) {
    if (n_components < 1) fail("component count must be at least 1");
    if (samples.rows() < n_components) fail("fewer samples than components");
    if (cfg.n_restarts < 1) fail("n_restarts must be at least 1");
    if (cfg.tol <= 0) fail("tol must be positive");

    Eigen::VectorXd floor = make_floor(samples, cfg.variance_floor);

    EmRun best;
    for (int r = 0; r < cfg.n_restarts; ++r) {
        EmRun run = run_em(samples, n_components, cfg, floor, cfg.seed + static_cast<std::uint64_t>(r));
        if (run.final_ll > best.final_ll) best = std::move(run);
    }

    GmmModel model;
    model.components = std::move(best.components);
    model.covariance_mode = cfg.covariance_mode;
    model.total_log_likelihood = best.final_ll;
    model.fit_ll_trace = std::move(best.ll_trace);
    model.n_params = parameter_count(n_components, samples.cols(), cfg.covariance_mode);
    auto [aic, bic] = information_criteria(model, static_cast<double>(samples.rows()));
    model.aic = aic;
    model.bic = bic;
    return model;
}

double component_log_density(const GmmModel& model, int component, const Eigen::VectorXd& x) {
    if (component < 0 || component >= model.component_count()) fail("component index out of range");
    const auto& c = model.components[static_cast<std::size_t>(component)];
    if (x.size() != c.mean.size()) fail("dimension mismatch in density evaluation");
    ComponentFactor f = factor_component(c);
    Eigen::VectorXd diff = x - c.mean;
    f.chol_lower.triangularView<Eigen::Lower>().solveInPlace(diff);
    return -0.5 * diff.squaredNorm() + f.log_norm;
}

double log_density(const GmmModel& model, const Eigen::VectorXd& x) {
    if (model.components.empty()) fail("empty model");
    std::vector<double> terms;
    terms.reserve(model.components.size());
    for (int l = 0; l < model.component_count(); ++l)
        terms.push_back(component_log_density(model, l, x) +
                        std::log(model.components[static_cast<std::size_t>(l)].weight));
    return log_sum_exp(terms);
}

Eigen::MatrixXd component_log_density_matrix(const GmmModel& model, const Eigen::MatrixXd& X) {
    if (model.components.empty()) fail("empty model");
    if (X.cols() != model.dim()) fail("dimension mismatch in density evaluation");
    Eigen::MatrixXd out(X.rows(), model.component_count());
    for (int l = 0; l < model.component_count(); ++l) {
        const auto& c = model.components[static_cast<std::size_t>(l)];
        ComponentFactor f = factor_component(c);
        out.col(l) = log_density_column(c, f, X);
    }
    return out;
}

std::pair<double, double> information_criteria(const GmmModel& model, double sample_count) {
    if (sample_count < 1) fail("sample count must be at least 1");
    double k = model.n_params;
    double ll = model.total_log_likelihood;
    return {2.0 * k - 2.0 * ll, std::log(sample_count) * k - 2.0 * ll};
}

GmmModel select_components(const Eigen::MatrixXd& samples, const std::vector<int>& candidates,
                           const GmmFitConfig& cfg) {
    if (candidates.empty()) fail("empty candidate list");
    std::vector<int> sorted = candidates;
    std::sort(sorted.begin(), sorted.end());
    GmmModel best;
    bool have = false;
    for (int L : sorted) {
        GmmModel fit = em_fit(samples, L, cfg);
        if (!have || fit.bic < best.bic) {
            best = std::move(fit);
            have = true;
        }
    }
    return best;
}

nlohmann::json gmm_to_json(const GmmModel& model) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : model.components) {
        nlohmann::json jc;
        jc["weight"] = c.weight;
        jc["mean"] = std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size());
        if (model.covariance_mode == CovarianceMode::Diagonal) {
            Eigen::VectorXd d = c.covariance.diagonal();
            jc["variances"] = std::vector<double>(d.data(), d.data() + d.size());
        } else {
            nlohmann::json rows = nlohmann::json::array();
            for (Eigen::Index i = 0; i < c.covariance.rows(); ++i) {
                std::vector<double> row(static_cast<std::size_t>(c.covariance.cols()));
                for (Eigen::Index col = 0; col < c.covariance.cols(); ++col)
                    row[static_cast<std::size_t>(col)] = c.covariance(i, col);
                rows.push_back(std::move(row));
            }
            jc["covariance"] = rows;
        }
        comps.push_back(std::move(jc));
    }
    return nlohmann::json{
        {"covariance_mode", model.covariance_mode == CovarianceMode::Full ? "full" : "diagonal"},
        {"total_log_likelihood", model.total_log_likelihood},
        {"n_params", model.n_params},
        {"aic", model.aic},
        {"bic", model.bic},
        {"components", std::move(comps)}};
}

GmmModel gmm_from_json(const nlohmann::json& j) {
    GmmModel model;
    std::string mode = j.at("covariance_mode").get<std::string>();
    if (mode == "full")
        model.covariance_mode = CovarianceMode::Full;
    else if (mode == "diagonal")
        model.covariance_mode = CovarianceMode::Diagonal;
    else
        fail("unknown covariance_mode: " + mode);
    model.total_log_likelihood = j.at("total_log_likelihood").get<double>();
    model.n_params = j.at("n_params").get<int>();
    model.aic = j.at("aic").get<double>();
    model.bic = j.at("bic").get<double>();
    for (const auto& jc : j.at("components")) {
        GaussianComponent c;
        c.weight = jc.at("weight").get<double>();
        auto mean = jc.at("mean").get<std::vector<double>>();
        c.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(),
                                                   static_cast<Eigen::Index>(mean.size()));
        if (model.covariance_mode == CovarianceMode::Diagonal) {
            auto vars = jc.at("variances").get<std::vector<double>>();
            c.covariance = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(vars.size()),
                                                 static_cast<Eigen::Index>(vars.size()));
            for (std::size_t i = 0; i < vars.size(); ++i)
                c.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = vars[i];
        } else {
            auto rows = jc.at("covariance");
            Eigen::Index n = static_cast<Eigen::Index>(rows.size());
            c.covariance = Eigen::MatrixXd(n, n);
            for (Eigen::Index r = 0; r < n; ++r) {
                auto row = rows[static_cast<std::size_t>(r)].get<std::vector<double>>();
                for (Eigen::Index col = 0; col < n; ++col)
                    c.covariance(r, col) = row[static_cast<std::size_t>(col)];
            }
        }
        model.components.push_back(std::move(c));
    }
    if (model.components.empty()) fail("model has no components");
    return model;
}

}  // namespace aer
