#pragma once

// Data-center state and its instantaneous cost: linear server power with a
// sleep state, per-PM shortage, and the per-slot migration cap.

#include <cstddef>
#include <vector>

#include "madvm/demand.hpp"

namespace madvm {

struct ClusterSpec {
    std::size_t num_pms = 1;
    std::size_t num_vms = 1;
    double capacity = 1.0;          // T_r; VM demands are fractions of it
    double p_idle = 250.0;          // watts
    double p_max = 500.0;
    double p_sleep = 50.0;
    std::size_t max_migrations = 1; // T_m
    double lambda = 1e6;            // weight of resource shortage

    void validate() const;
};

/// ceil(0.02 * num_vms)
std::size_t default_max_migrations(std::size_t num_vms);

/// assignment[l] = PM hosting VM l.
struct Placement {
    std::vector<PmId> assignment;

    std::size_t size() const noexcept { return assignment.size(); }
    PmId operator[](std::size_t vm) const { return assignment[vm]; }

    friend bool operator==(const Placement&, const Placement&) = default;
};

struct SystemState {
    std::vector<LevelIndex> levels;
    Placement placement;

    friend bool operator==(const SystemState&, const SystemState&) = default;
};

/// Target PM per VM for the next slot; equal to the current location when
/// the VM stays.
struct MigrationPlan {
    std::vector<PmId> targets;

    static MigrationPlan stay(const Placement& p) { return MigrationPlan{p.assignment}; }

    friend bool operator==(const MigrationPlan&, const MigrationPlan&) = default;
};

std::size_t count_migrations(const Placement& current, const MigrationPlan& plan);

void validate_placement(const Placement& p, const ClusterSpec& spec);
void validate_state(const SystemState& s, const DemandLevelSet& levels, const ClusterSpec& spec);

/// Sleep power when the PM hosts nothing, otherwise the linear model with
/// utilisation clamped at 1.
double server_power(double load_fraction, const ClusterSpec& spec, bool hosts_any_vm);

/// Per-PM load as a fraction of capacity.
std::vector<double> pm_loads(const SystemState& s, const DemandLevelSet& levels, const ClusterSpec& spec);
std::vector<std::size_t> pm_vm_counts(const Placement& p, const ClusterSpec& spec);
std::size_t active_pms(const Placement& p, const ClusterSpec& spec);

double total_power(const SystemState& s, const DemandLevelSet& levels, const ClusterSpec& spec);
std::vector<double> shortage_vector(const SystemState& s, const DemandLevelSet& levels, const ClusterSpec& spec);
double instantaneous_cost(const SystemState& s, const DemandLevelSet& levels, const ClusterSpec& spec);

/// Check the cap and return the next slot's placement. Throws
/// ConstraintError when the plan moves more than max_migrations VMs.
Placement apply_migrations(const SystemState& s, const MigrationPlan& plan, const ClusterSpec& spec);

/// Cost of the cluster with one extra VM dropped onto a fixed background of
/// loads, in O(1) per query.
class IncrementalCost {
public:
    IncrementalCost(std::vector<double> base_loads, std::vector<std::size_t> base_counts, const ClusterSpec& spec);

    double with_vm_at(double demand_fraction, PmId pm) const;
    double base_cost() const noexcept { return base_power_ + weight_ * base_shortage_; }

private:
    ClusterSpec spec_;
    std::vector<double> loads_;
    std::vector<std::size_t> counts_;
    double base_power_ = 0.0;
    double base_shortage_ = 0.0;
    double weight_ = 0.0;
};

} // namespace madvm
