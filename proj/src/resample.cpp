#include "aer/resample.hpp"

#include "aer/common.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

namespace aer {

namespace {

constexpr char kStage[] = "resample";

[[noreturn]] void fail(const std::string& message) { throw StageError(kStage, message); }

}  // namespace

std::vector<int> rank_majority_by_component(const Dataset& data, const GmmModel& model,
                                            int component) {
    if (component < 0 || component >= model.component_count())
        fail("component index out of range");
    std::vector<int> majority = data.majority_indices();
    if (majority.empty()) fail("dataset has no majority rows");

    Eigen::MatrixXd rows(static_cast<Eigen::Index>(majority.size()), data.feature_count());
    for (std::size_t i = 0; i < majority.size(); ++i)
        rows.row(static_cast<Eigen::Index>(i)) = data.features.row(majority[i]);
    Eigen::MatrixXd dens = component_log_density_matrix(model, rows);

    std::vector<int> order(majority.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        double da = dens(a, component);
        double db = dens(b, component);
        if (da != db) return da > db;
        return majority[static_cast<std::size_t>(a)] < majority[static_cast<std::size_t>(b)];
    });
    std::vector<int> ranked(majority.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        ranked[i] = majority[static_cast<std::size_t>(order[i])];
    return ranked;
}

SubsetPlan make_type_a(const Dataset& data, const GmmModel& model, int component) {
    const int L = model.component_count();
    if (data.majority_count() < L) fail("fewer majority rows than components");
    std::vector<int> ranked = rank_majority_by_component(data, model, component);
    std::size_t take = static_cast<std::size_t>(data.majority_count() / L);
    SubsetPlan plan;
    plan.component_index = component;
    plan.kind = SubsetKind::TypeA;
    plan.majority_indices.assign(ranked.begin(), ranked.begin() + static_cast<long>(take));
    return plan;
}

SubsetPlan make_type_b(const Dataset& data, const GmmModel& model, int component,
                       std::uint64_t seed) {
    std::vector<int> ranked = rank_majority_by_component(data, model, component);
    const std::size_t m_k = static_cast<std::size_t>(data.minority_count());
    const std::size_t want_top = m_k;
    const std::size_t want_random = m_k / 2;

    SubsetPlan plan;
    plan.component_index = component;
    plan.kind = SubsetKind::TypeB;

    if (ranked.size() < want_top + want_random) {
        plan.majority_indices = ranked;  // all available majority, flagged
        plan.majority_shortfall = true;
        return plan;
    }

    plan.majority_indices.assign(ranked.begin(), ranked.begin() + static_cast<long>(want_top));
    // Uniform sample without replacement from the remaining ranked majority.
    std::vector<int> pool(ranked.begin() + static_cast<long>(want_top), ranked.end());
    std::mt19937_64 rng(derive_seed(seed, "type-b-complement"));
    for (std::size_t k = 0; k < want_random; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
        std::swap(pool[k], pool[pick(rng)]);
        plan.majority_indices.push_back(pool[k]);
    }
    return plan;
}

TomekReport tomek_remove(const Dataset& subset) {
    const Eigen::Index m = subset.row_count();
    if (subset.minority_count() == 0 || subset.majority_count() == 0)
        fail("tomek removal needs both classes present");

    // Squared Euclidean distances preserve the strict-inequality comparisons.
    // A pair is a Tomek link exactly when each member is the other's unique
    // strict nearest neighbor; distance ties disqualify.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> nn_dist(static_cast<std::size_t>(m), inf);
    std::vector<Eigen::Index> nn_index(static_cast<std::size_t>(m), -1);
    std::vector<int> nn_count(static_cast<std::size_t>(m), 0);

    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            double d = (subset.features.row(i) - subset.features.row(j)).squaredNorm();
            for (Eigen::Index r : {i, j}) {
                Eigen::Index other = r == i ? j : i;
                auto ri = static_cast<std::size_t>(r);
                if (d < nn_dist[ri]) {
                    nn_dist[ri] = d;
                    nn_index[ri] = other;
                    nn_count[ri] = 1;
                } else if (d == nn_dist[ri]) {
                    ++nn_count[ri];
                }
            }
        }
    }

    TomekReport report;
    for (Eigen::Index i = 0; i < m; ++i) {
        auto si = static_cast<std::size_t>(i);
        Eigen::Index j = nn_index[si];
        if (j <= i) continue;  // visit each pair once
        auto sj = static_cast<std::size_t>(j);
        if (subset.labels[si] == subset.labels[sj]) continue;
        bool mutual = nn_count[si] == 1 && nn_count[sj] == 1 && nn_index[sj] == i;
        if (!mutual) continue;
        ++report.pairs_found;
        Eigen::Index majority_row = subset.labels[si] == 0 ? i : j;
        report.removed_majority_indices.push_back(static_cast<int>(majority_row));
    }
    std::sort(report.removed_majority_indices.begin(), report.removed_majority_indices.end());
    return report;
}

Dataset materialize(const Dataset& parent, const SubsetPlan& plan) {
    std::vector<int> rows = plan.majority_indices;
    std::vector<int> minority = parent.minority_indices();
    rows.insert(rows.end(), minority.begin(), minority.end());
    if (rows.empty()) fail("empty subset plan");
    return parent.select_rows(rows);
}

}  // namespace aer
