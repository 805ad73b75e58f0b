#pragma once

#include "aer/dataset.hpp"
#include "aer/gmm.hpp"

#include <cstdint>
#include <vector>

namespace aer {

enum class SubsetKind { TypeA, TypeB };

// Recipe for one of the 2L training subsets: majority rows picked per
// component, plus every minority row of the parent dataset.
struct SubsetPlan {
    int component_index = 0;
    SubsetKind kind = SubsetKind::TypeA;
    std::vector<int> majority_indices;  // parent-dataset row indices
    bool includes_all_minority = true;
    // Type-B only: set when the majority pool was too small and the subset
    // fell back to all available majority rows.
    bool majority_shortfall = false;
};

struct TomekReport {
    std::vector<int> removed_majority_indices;  // row positions in the subset
    int pairs_found = 0;
};

// Majority rows ordered by descending log-density under one component;
// ties break toward the smaller dataset index.
std::vector<int> rank_majority_by_component(const Dataset& data, const GmmModel& model,
                                            int component);

// Top floor(m_n / L) ranked majority rows for the component, plus all minority.
SubsetPlan make_type_a(const Dataset& data, const GmmModel& model, int component);

// Top m_k ranked majority rows, plus floor(0.5 m_k) sampled uniformly without
// replacement from the remaining majority, plus all minority.
SubsetPlan make_type_b(const Dataset& data, const GmmModel& model, int component,
                       std::uint64_t seed);

// One pass of Tomek-link cleaning: cross-class pairs that are mutual nearest
// neighbors under strict Euclidean inequality lose their majority member.
TomekReport tomek_remove(const Dataset& subset);

// Builds the subset dataset: planned majority rows first, then all minority.
Dataset materialize(const Dataset& parent, const SubsetPlan& plan);

}  // namespace aer
