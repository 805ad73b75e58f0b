#pragma once

#include <vector>

namespace aer {

// Two classifiers' predictions against the same ground truth.
struct PairedPredictions {
    std::vector<int> truth;
    std::vector<int> pred_a;
    std::vector<int> pred_b;
};

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool reject_at_alpha = false;  // alpha = 0.05
};

// McNemar's test on the discordant counts with Edwards' continuity correction
// (clamped at zero); p from the chi-squared distribution with 1 dof.
// Zero discordance yields statistic 0, p 1.
TestResult mcnemar(const PairedPredictions& paired);

// Wilcoxon signed-rank test on per-instance correctness differences.
// Zero differences are discarded, ties share average ranks; the statistic is
// the smaller signed-rank sum. Exact enumeration below n = 20, otherwise
// normal approximation with tie-corrected variance and continuity correction.
TestResult wilcoxon_signed_rank(const PairedPredictions& paired);

}  // namespace aer
