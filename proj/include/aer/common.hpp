#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aer {

// Error raised by a named pipeline stage; the stage tag survives up to the CLI.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message)
        : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

// Deterministic per-stage seed derivation. Stages and parallel legs never share
// RNG state; each derives its own seed from (base, tag).
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

// Sum that does not depend on the order the inputs were produced in
// (sorts a scratch copy first). Used wherever a reduction must be invariant
// to training-row permutation.
double stable_sum(std::vector<double> values);

// log(sum(exp(v))) without overflow/underflow.
double log_sum_exp(const std::vector<double>& values);

}  // namespace aer
