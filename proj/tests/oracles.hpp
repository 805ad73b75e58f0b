#pragma once

// Test-only reference implementations, deliberately independent of the code
// paths under test: explicit matrix inverses instead of Cholesky factors,
// pair enumeration instead of nearest-neighbor bookkeeping, quadrature
// instead of closed-form survival functions.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

// Multivariate normal pdf via determinant and explicit inverse.
inline double mvn_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                      const Eigen::MatrixXd& cov) {
    const auto n = static_cast<double>(x.size());
    Eigen::MatrixXd inverse = cov.inverse();
    double det = cov.determinant();
    Eigen::VectorXd d = x - mean;
    double quad = d.dot(inverse * d);
    return std::exp(-0.5 * quad) /
           std::sqrt(std::pow(2.0 * std::numbers::pi, n) * det);
}

// Mixture density by direct summation (no log-space tricks).
inline double mixture_pdf(const std::vector<double>& weights,
                          const std::vector<Eigen::VectorXd>& means,
                          const std::vector<Eigen::MatrixXd>& covs, const Eigen::VectorXd& x) {
    double total = 0.0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        total += weights[l] * mvn_pdf(x, means[l], covs[l]);
    return total;
}

// Chi-squared(1) survival function by adaptive Simpson quadrature of the pdf.
inline double chi2_1dof_sf_quadrature(double x) {
    auto pdf = [](double t) {
        return std::exp(-t / 2.0) / std::sqrt(2.0 * std::numbers::pi * t);
    };
    // Integrate the density from x outward until the tail is negligible.
    double upper = std::max(x + 60.0, 80.0);
    const int steps = 200000;
    double h = (upper - x) / steps;
    double acc = 0.0;
    for (int i = 0; i < steps; ++i) {
        double a = x + i * h;
        double b = a + h;
        double mid = 0.5 * (a + b);
        // Simpson's rule; guard the integrable singularity at t = 0.
        double fa = a > 0 ? pdf(a) : 0.0;
        acc += (fa + 4.0 * pdf(mid) + pdf(b)) * h / 6.0;
    }
    return std::min(1.0, acc);
}

// Exact two-sided sign-test tail: P(K <= k) + P(K >= n - k), K ~ Bin(n, 1/2).
inline double binomial_two_sided(int n, int k_min) {
    if (n == 0) return 1.0;
    std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
    // log-binomial for numerical safety at larger n
    for (int k = 0; k <= n; ++k) {
        double log_c = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        pmf[static_cast<std::size_t>(k)] = std::exp(log_c - n * std::log(2.0));
    }
    double p = 0.0;
    for (int k = 0; k <= k_min; ++k) p += pmf[static_cast<std::size_t>(k)];
    for (int k = n - k_min; k <= n; ++k) p += pmf[static_cast<std::size_t>(k)];
    return std::min(1.0, p);
}

// Brute-force Tomek pairs: for every cross-class pair, check the strict
// inequality of Eq-style mutual nearest neighborhood against all third points.
struct TomekOracleResult {
    std::vector<int> removed_majority;
    int pairs = 0;
};

inline TomekOracleResult tomek_bruteforce(const Eigen::MatrixXd& X,
                                          const std::vector<int>& labels) {
    const Eigen::Index m = X.rows();
    TomekOracleResult result;
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)])
                continue;
            double dij = (X.row(i) - X.row(j)).squaredNorm();
            bool is_pair = true;
            for (Eigen::Index k = 0; k < m && is_pair; ++k) {
                if (k == i || k == j) continue;
                if (!(dij < (X.row(i) - X.row(k)).squaredNorm())) is_pair = false;
                if (!(dij < (X.row(j) - X.row(k)).squaredNorm())) is_pair = false;
            }
            if (is_pair) {
                ++result.pairs;
                result.removed_majority.push_back(
                    static_cast<int>(labels[static_cast<std::size_t>(i)] == 0 ? i : j));
            }
        }
    }
    std::sort(result.removed_majority.begin(), result.removed_majority.end());
    return result;
}

// Largest-remainder apportionment, re-derived for split-size checks.
inline std::array<int, 3> largest_remainder_ref(int count, double f0, double f1, double f2) {
    std::array<double, 3> fracs{f0, f1, f2};
    std::array<int, 3> base{};
    std::array<std::pair<double, int>, 3> rema{};
    int used = 0;
    for (int s = 0; s < 3; ++s) {
        double q = fracs[static_cast<std::size_t>(s)] * count;
        base[static_cast<std::size_t>(s)] = static_cast<int>(std::floor(q));
        rema[static_cast<std::size_t>(s)] = {q - std::floor(q), s};
        used += base[static_cast<std::size_t>(s)];
    }
    std::stable_sort(rema.begin(), rema.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; k < count - used; ++k)
        ++base[static_cast<std::size_t>(rema[static_cast<std::size_t>(k)].second)];
    return base;
}

}  // namespace oracle
