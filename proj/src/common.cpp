#include "aer/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aer {

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    // FNV-1a over the tag, then splitmix64-style finalization mixed with the base.
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull + h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double stable_sum(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double total = 0.0;
    for (double v : values) total += v;
    return total;
}

double log_sum_exp(const std::vector<double>& values) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : values) hi = std::max(hi, v);
    if (!std::isfinite(hi)) return hi;
    double acc = 0.0;
    for (double v : values) acc += std::exp(v - hi);
    return hi + std::log(acc);
}

}  // namespace aer
