#include "madvm/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "madvm/errors.hpp"

namespace madvm {

void ClusterSpec::validate() const
{
    if (num_pms < 1 || num_vms < 1) {
        throw InputError("cluster needs at least one PM and one VM");
    }
    if (!(capacity > 0.0)) {
        throw InputError("PM capacity must be positive");
    }
    if (!(p_sleep < p_idle && p_idle < p_max)) {
        throw InputError("power model requires p_sleep < p_idle < p_max");
    }
    if (!(lambda >= 0.0)) {
        throw InputError("lambda must be non-negative");
    }
}

std::size_t default_max_migrations(std::size_t num_vms)
{
    return static_cast<std::size_t>(std::ceil(0.02 * static_cast<double>(num_vms) - 1e-12));
}

std::size_t count_migrations(const Placement& current, const MigrationPlan& plan)
{
    if (plan.targets.size() != current.size()) {
        throw InputError("migration plan and placement cover different VM counts");
    }
    std::size_t moved = 0;
    for (std::size_t l = 0; l < current.size(); ++l) {
        moved += plan.targets[l] != current[l] ? 1 : 0;
    }
    return moved;
}

void validate_placement(const Placement& p, const ClusterSpec& spec)
{
    if (p.size() != spec.num_vms) {
        throw InputError("placement covers " + std::to_string(p.size()) + " VMs, expected " +
                         std::to_string(spec.num_vms));
    }
    for (std::size_t l = 0; l < p.size(); ++l) {
        if (p[l] >= spec.num_pms) {
            throw InputError("VM " + std::to_string(l) + " placed on unknown PM " + std::to_string(p[l]));
        }
    }
}

void validate_state(const SystemState& s, const DemandLevelSet& levels, const ClusterSpec& spec)
{
    validate_placement(s.placement, spec);
    if (s.levels.size() != spec.num_vms) {
        throw InputError("state carries the wrong number of demand levels");
    }
    for (LevelIndex k : s.levels) {
        if (k >= levels.size()) {
            throw InputError("demand level index out of range");
        }
    }
}

double server_power(double load_fraction, const ClusterSpec& spec, bool hosts_any_vm)
{
    if (!hosts_any_vm) {
        return spec.p_sleep;
    }
    return spec.p_idle + (spec.p_max - spec.p_idle) * std::min(std::max(load_fraction, 0.0), 1.0);
}

std::vector<double> pm_loads(const SystemState& s, const DemandLevelSet& levels, const ClusterSpec& spec)
{
    std::vector<double> loads(spec.num_pms, 0.0);
    for (std::size_t l = 0; l < s.levels.size(); ++l) {
        loads[s.placement[l]] += levels[s.levels[l]];
    }
    for (double& x : loads) {
        x /= spec.capacity;
    }
    return loads;
}

std::vector<std::size_t> pm_vm_counts(const Placement& p, const ClusterSpec& spec)
{
    std::vector<std::size_t> counts(spec.num_pms, 0);
    for (PmId pm : p.assignment) {
        ++counts[pm];
    }
    return counts;
}

std::size_t active_pms(const Placement& p, const ClusterSpec& spec)
{
    const auto counts = pm_vm_counts(p, spec);
    return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
}

double total_power(const SystemState& s, const DemandLevelSet& levels, const ClusterSpec& spec)
{
    const auto loads = pm_loads(s, levels, spec);
    const auto counts = pm_vm_counts(s.placement, spec);
    double total = 0.0;
    for (std::size_t i = 0; i < spec.num_pms; ++i) {
        total += server_power(loads[i], spec, counts[i] > 0);
    }
    return total;
}

std::vector<double> shortage_vector(const SystemState& s, const DemandLevelSet& levels, const ClusterSpec& spec)
{
    auto theta = pm_loads(s, levels, spec);
    for (double& x : theta) {
        x = std::max(x - 1.0, 0.0);
    }
    return theta;
}

double instantaneous_cost(const SystemState& s, const DemandLevelSet& levels, const ClusterSpec& spec)
{
    const auto theta = shortage_vector(s, levels, spec);
    double shortage = 0.0;
    for (double x : theta) {
        shortage += x;
    }
    return total_power(s, levels, spec) + spec.lambda / static_cast<double>(spec.num_vms) * shortage;
}

Placement apply_migrations(const SystemState& s, const MigrationPlan& plan, const ClusterSpec& spec)
{
    Placement next{plan.targets};
    validate_placement(next, spec);
    const std::size_t moved = count_migrations(s.placement, plan);
    if (moved > spec.max_migrations) {
        throw ConstraintError("plan migrates " + std::to_string(moved) + " VMs, cap is " +
                              std::to_string(spec.max_migrations));
    }
    return next;
}

IncrementalCost::IncrementalCost(std::vector<double> base_loads, std::vector<std::size_t> base_counts,
                                 const ClusterSpec& spec)
    : spec_(spec), loads_(std::move(base_loads)), counts_(std::move(base_counts)),
      weight_(spec.lambda / static_cast<double>(spec.num_vms))
{
    if (loads_.size() != spec.num_pms || counts_.size() != spec.num_pms) {
        throw InputError("background load vector does not match PM count");
    }
    for (std::size_t i = 0; i < spec.num_pms; ++i) {
        base_power_ += server_power(loads_[i], spec_, counts_[i] > 0);
        base_shortage_ += std::max(loads_[i] - 1.0, 0.0);
    }
}

double IncrementalCost::with_vm_at(double demand_fraction, PmId pm) const
{
    const double before = loads_[pm];
    const double after = before + demand_fraction / spec_.capacity;
    const double power = base_power_ - server_power(before, spec_, counts_[pm] > 0) + server_power(after, spec_, true);
    const double shortage = base_shortage_ - std::max(before - 1.0, 0.0) + std::max(after - 1.0, 0.0);
    return power + weight_ * shortage;
}

} // namespace madvm
