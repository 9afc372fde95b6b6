#pragma once

// Test-only ground truth for the exact solver: evaluate deterministic
// stationary policies through the stationary distributions of their chains
// and enumerate all of them on small instances.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "madvm/exact_mdp.hpp"

namespace madvm::oracle {

/// Stationary distribution of an irreducible stochastic matrix (row-major)
/// by Grassmann-Taksar-Heyman elimination; no subtractions, so it stays
/// accurate for nearly decomposable chains.
std::vector<double> gth_stationary(std::vector<double> a, std::size_t n);

struct PolicyGain {
    double min_gain = 0.0;   // over the recurrent classes of the policy's chain
    double max_gain = 0.0;
    std::size_t classes = 0;
};

/// Exact long-run average cost of a deterministic policy, class by class.
PolicyGain evaluate_policy(const ExactModel& model, std::span<const std::size_t> action_index);

struct EnumerationResult {
    double best_gain = 0.0;
    std::uint64_t policies = 0;
    std::vector<std::size_t> best_policy;
};

/// Minimum over every deterministic stationary policy of its best
/// recurrent-class gain. Throws when more than `limit` policies exist.
EnumerationResult enumerate_policies(const ExactModel& model, std::uint64_t limit = 100000);

/// Same minimum for chains with strictly positive entries, where the
/// recurrent classes are products of all demand vectors with closed
/// placement sets. Needs at most 32 placements and 64 states.
EnumerationResult enumerate_policies_full_support(const ExactModel& model);

} // namespace madvm::oracle
