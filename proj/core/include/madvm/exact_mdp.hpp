#pragma once

// Exact average-cost MDP over the full joint state space (demand levels x
// placements), solved by relative value iteration. Exponential in the VM
// count; meant as a ground-truth oracle for tiny instances.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "madvm/cluster.hpp"
#include "madvm/demand.hpp"

namespace madvm {

inline constexpr std::size_t kOracleStateBudget = 100000;

/// Bijection between joint states and [0, N_S). VM l contributes the digit
/// level * num_pms + pm in base (num_levels * num_pms), VM 0 least
/// significant.
class JointStateSpace {
public:
    JointStateSpace(std::size_t num_vms, std::size_t num_pms, std::size_t num_levels,
                    std::size_t budget = kOracleStateBudget);

    std::size_t size() const noexcept { return size_; }
    std::size_t num_vms() const noexcept { return vms_; }
    std::size_t num_pms() const noexcept { return pms_; }
    std::size_t num_levels() const noexcept { return levels_; }
    std::size_t local_size() const noexcept { return pms_ * levels_; }
    std::size_t local_index(LevelIndex level, PmId pm) const noexcept { return level * pms_ + pm; }

    std::size_t pack(const SystemState& s) const;
    SystemState unpack(std::size_t index) const;

private:
    std::size_t vms_;
    std::size_t pms_;
    std::size_t levels_;
    std::size_t size_;
};

/// Every target vector reachable from `current` within the migration cap, in
/// lexicographic order of the target vector.
std::vector<MigrationPlan> feasible_plans(const Placement& current, const ClusterSpec& spec);

/// Product of per-VM demand transitions when `to.placement` equals the plan's
/// targets, zero otherwise. Throws ConstraintError for an over-cap plan.
double joint_transition_prob(const SystemState& from, const SystemState& to, const MigrationPlan& plan,
                             std::span<const DemandChain> chains, const ClusterSpec& spec);

/// Precomputed costs, actions and sparse demand transitions for one instance.
class ExactModel {
public:
    ExactModel(std::vector<DemandChain> chains, const ClusterSpec& spec, const DemandLevelSet& levels,
               std::size_t budget = kOracleStateBudget);

    const JointStateSpace& space() const noexcept { return space_; }
    const ClusterSpec& spec() const noexcept { return spec_; }
    const DemandLevelSet& levels() const noexcept { return levels_; }
    std::span<const DemandChain> chains() const noexcept { return chains_; }
    std::size_t num_states() const noexcept { return space_.size(); }

    double cost(std::size_t s) const { return cost_[s]; }
    std::size_t num_actions(std::size_t s) const { return actions_[y_of_[s]].size(); }
    MigrationPlan action(std::size_t s, std::size_t a) const;
    std::size_t moves(std::size_t s, std::size_t a) const;

    /// g(s) + sum_j Pr[j | s, a] v(j)
    double q_value(std::size_t s, std::size_t a, std::span<const double> v) const;

    /// Sparse successor list (state, probability) under action a.
    std::vector<std::pair<std::size_t, double>> successors(std::size_t s, std::size_t a) const;

private:
    std::vector<DemandChain> chains_;
    ClusterSpec spec_;
    DemandLevelSet levels_;
    JointStateSpace space_;
    std::size_t num_demand_vectors_ = 0;
    std::size_t num_placements_ = 0;
    std::vector<std::size_t> q_of_;
    std::vector<std::size_t> y_of_;
    std::vector<std::size_t> index_;   // index_[q * num_placements_ + y]
    std::vector<std::vector<std::pair<std::size_t, double>>> demand_successors_;
    std::vector<std::vector<PmId>> placements_;
    std::vector<std::vector<std::size_t>> actions_;   // per placement, lexicographic
    std::vector<double> cost_;
};

struct ValueIterationOptions {
    double tol = 1e-6;
    std::size_t max_iter = 10000;
    std::optional<std::size_t> reference;   // default: every VM at level 0 on PM 0
    bool record_spans = false;
};

struct UtilityVector {
    std::vector<double> values;
    std::size_t reference_state = 0;
    double beta = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> spans;   // span(V^t - V^{t-1}) per sweep, when recorded
};

UtilityVector value_iteration(const ExactModel& model, const ValueIterationOptions& options = {});
UtilityVector value_iteration(std::span<const DemandChain> chains, const ClusterSpec& spec,
                              const DemandLevelSet& levels, const ValueIterationOptions& options = {});

enum class TieBreak {
    lexicographic,   // smallest target vector among minimisers
    prefer_stay,     // fewest migrations, then smallest target vector
};

struct Policy {
    std::vector<MigrationPlan> actions;   // indexed by joint state
    std::vector<std::size_t> action_index;
};

Policy extract_policy(const ExactModel& model, const UtilityVector& utility,
                      TieBreak tie_break = TieBreak::lexicographic);

/// {"beta", "reference_state", "iterations", "converged", "values", "policy"}
std::string oracle_to_json(const ExactModel& model, const UtilityVector& utility, const Policy& policy);

} // namespace madvm
