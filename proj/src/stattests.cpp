#include "aer/stattests.hpp"

#include "aer/common.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace aer {

namespace {

constexpr char kStage[] = "stattests";
constexpr double kAlpha = 0.05;

[[noreturn]] void fail(const std::string& message) { throw StageError(kStage, message); }

void validate(const PairedPredictions& p) {
    if (p.truth.empty()) fail("empty paired predictions");
    if (p.truth.size() != p.pred_a.size() || p.truth.size() != p.pred_b.size())
        fail("paired prediction vectors must have equal length");
    for (std::size_t i = 0; i < p.truth.size(); ++i) {
        for (int v : {p.truth[i], p.pred_a[i], p.pred_b[i]})
            if (v != 0 && v != 1) fail("labels must be 0 or 1");
    }
}

// Survival function of the chi-squared distribution with one degree of freedom.
double chi2_1dof_sf(double x) { return std::erfc(std::sqrt(x / 2.0)); }

// Standard normal CDF.
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

TestResult mcnemar(const PairedPredictions& paired) {
    validate(paired);
    std::int64_t b = 0, c = 0;  // b: A right / B wrong, c: A wrong / B right
    for (std::size_t i = 0; i < paired.truth.size(); ++i) {
        bool a_ok = paired.pred_a[i] == paired.truth[i];
        bool b_ok = paired.pred_b[i] == paired.truth[i];
        if (a_ok && !b_ok) ++b;
        if (!a_ok && b_ok) ++c;
    }
    TestResult r;
    if (b + c == 0) {
        r.statistic = 0.0;
        r.p_value = 1.0;
        r.reject_at_alpha = false;
        return r;
    }
    double corrected = std::max(std::abs(static_cast<double>(b - c)) - 1.0, 0.0);
    r.statistic = corrected * corrected / static_cast<double>(b + c);
    r.p_value = chi2_1dof_sf(r.statistic);
    r.reject_at_alpha = r.p_value < kAlpha;
    return r;
}

TestResult wilcoxon_signed_rank(const PairedPredictions& paired) {
    validate(paired);
    std::vector<int> diffs;  // correctness(A) - correctness(B), zeros dropped
    for (std::size_t i = 0; i < paired.truth.size(); ++i) {
        int a_ok = paired.pred_a[i] == paired.truth[i] ? 1 : 0;
        int b_ok = paired.pred_b[i] == paired.truth[i] ? 1 : 0;
        int d = a_ok - b_ok;
        if (d != 0) diffs.push_back(d);
    }

    TestResult r;
    if (diffs.empty()) {
        r.statistic = 0.0;
        r.p_value = 1.0;
        r.reject_at_alpha = false;
        return r;
    }

    const std::size_t n = diffs.size();
    // Average ranks over |d|; here every |d| is 1, but the ranking is kept
    // general so the routine stays a faithful signed-rank test.
    std::vector<double> magnitudes(n);
    for (std::size_t i = 0; i < n; ++i) magnitudes[i] = std::abs(diffs[i]);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return magnitudes[a] < magnitudes[b]; });
    std::vector<double> ranks(n, 0.0);
    std::vector<double> tie_sizes;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && magnitudes[order[j]] == magnitudes[order[i]]) ++j;
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg_rank;
        tie_sizes.push_back(static_cast<double>(j - i));
        i = j;
    }

    double w_plus = 0.0, w_minus = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        (diffs[i] > 0 ? w_plus : w_minus) += ranks[i];
    double w = std::min(w_plus, w_minus);
    double total = w_plus + w_minus;
    r.statistic = w;

    if (n < 20) {
        // Exact two-sided p over all sign assignments of the observed ranks.
        const std::size_t assignments = std::size_t{1} << n;
        std::size_t hits = 0;
        for (std::size_t mask = 0; mask < assignments; ++mask) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (mask & (std::size_t{1} << i)) s += ranks[i];
            if (s <= w || s >= total - w) ++hits;
        }
        r.p_value = static_cast<double>(hits) / static_cast<double>(assignments);
    } else {
        double nn = static_cast<double>(n);
        double mean = nn * (nn + 1.0) / 4.0;
        double variance = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
        for (double t : tie_sizes) variance -= (t * t * t - t) / 48.0;
        if (variance <= 0.0) {
            r.p_value = 1.0;
        } else {
            double z = (w - mean + 0.5) / std::sqrt(variance);
            r.p_value = std::min(1.0, 2.0 * normal_cdf(z));
        }
    }
    r.reject_at_alpha = r.p_value < kAlpha;
    return r;
}

}  // namespace aer
