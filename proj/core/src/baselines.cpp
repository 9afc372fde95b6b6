#include "madvm/baselines.hpp"

#include <algorithm>
#include <numeric>

#include "madvm/errors.hpp"

namespace madvm {

namespace {

constexpr double kFitSlack = 1e-12;

std::vector<std::size_t> by_demand_descending(std::span<const double> demands)
{
    std::vector<std::size_t> order(demands.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return demands[a] > demands[b]; });
    return order;
}

} // namespace

Placement static_first_fit(std::span<const double> expected_demands, const ClusterSpec& spec)
{
    spec.validate();
    if (expected_demands.size() != spec.num_vms) {
        throw InputError("static_first_fit: need one expected demand per VM");
    }
    std::vector<double> loads(spec.num_pms, 0.0);
    Placement p;
    p.assignment.resize(spec.num_vms);
    for (std::size_t l = 0; l < spec.num_vms; ++l) {
        const double d = expected_demands[l] / spec.capacity;
        if (d < 0.0) {
            throw InputError("expected demand must be non-negative");
        }
        PmId chosen = spec.num_pms;
        for (PmId i = 0; i < spec.num_pms; ++i) {
            if (loads[i] + d <= 1.0 + kFitSlack) {
                chosen = i;
                break;
            }
        }
        if (chosen == spec.num_pms) {
            chosen = static_cast<PmId>(std::min_element(loads.begin(), loads.end()) - loads.begin());
        }
        loads[chosen] += d;
        p.assignment[l] = chosen;
    }
    return p;
}

DemandHistory::DemandHistory(std::size_t num_vms, std::size_t capacity_slots)
    : vms_(num_vms), capacity_(capacity_slots)
{
    if (num_vms == 0 || capacity_slots == 0) {
        throw InputError("demand history needs at least one VM and one slot");
    }
}

void DemandHistory::push(std::span<const double> demands)
{
    if (demands.size() != vms_) {
        throw InputError("demand history: wrong number of VMs");
    }
    rows_.emplace_back(demands.begin(), demands.end());
    if (rows_.size() > capacity_) {
        rows_.pop_front();
    }
}

std::vector<double> DemandHistory::window_max(std::size_t window) const
{
    std::vector<double> out(vms_, 0.0);
    const std::size_t n = std::min(window, rows_.size());
    for (std::size_t k = rows_.size() - n; k < rows_.size(); ++k) {
        for (std::size_t l = 0; l < vms_; ++l) {
            out[l] = std::max(out[l], rows_[k][l]);
        }
    }
    return out;
}

std::vector<double> DemandHistory::window_mean(std::size_t window) const
{
    std::vector<double> out(vms_, 0.0);
    const std::size_t n = std::min(window, rows_.size());
    if (n == 0) {
        return out;
    }
    for (std::size_t k = rows_.size() - n; k < rows_.size(); ++k) {
        for (std::size_t l = 0; l < vms_; ++l) {
            out[l] += rows_[k][l];
        }
    }
    for (auto& x : out) {
        x /= static_cast<double>(n);
    }
    return out;
}

MigrationPlan overflow_moves(const Placement& current, std::span<const double> predicted, const ClusterSpec& spec,
                             std::size_t budget)
{
    validate_placement(current, spec);
    if (predicted.size() != spec.num_vms) {
        throw InputError("overflow_moves: need one prediction per VM");
    }
    MigrationPlan plan = MigrationPlan::stay(current);
    std::vector<double> loads(spec.num_pms, 0.0);
    for (std::size_t l = 0; l < spec.num_vms; ++l) {
        loads[current[l]] += predicted[l] / spec.capacity;
    }
    const auto order = by_demand_descending(predicted);
    for (PmId src = 0; src < spec.num_pms && budget > 0; ++src) {
        for (const std::size_t l : order) {
            if (loads[src] <= 1.0 + kFitSlack || budget == 0) {
                break;
            }
            if (plan.targets[l] != src || current[l] != src) {
                continue;
            }
            const double d = predicted[l] / spec.capacity;
            for (PmId dst = 0; dst < spec.num_pms; ++dst) {
                if (dst != src && loads[dst] + d <= 1.0 + kFitSlack) {
                    plan.targets[l] = dst;
                    loads[src] -= d;
                    loads[dst] += d;
                    --budget;
                    break;
                }
            }
        }
    }
    return plan;
}

MigrationPlan predictive_scaler_step(const Placement& current, const DemandHistory& history,
                                     const ClusterSpec& spec, const PredictiveScalerOptions& options)
{
    if (history.empty()) {
        return MigrationPlan::stay(current);
    }
    const auto predicted = history.window_max(std::max<std::size_t>(options.window, 1));
    return overflow_moves(current, predicted, spec, spec.max_migrations);
}

PatternConsolidator::PatternConsolidator(const ClusterSpec& spec, PatternConsolidatorOptions options)
    : spec_(spec), options_(options)
{
    spec_.validate();
    if (options_.period == 0 || options_.window == 0) {
        throw InputError("pattern consolidator period and window must be positive");
    }
}

Placement PatternConsolidator::pack(std::span<const double> demands, const Placement& current) const
{
    if (demands.size() != spec_.num_vms || current.size() != spec_.num_vms) {
        throw InputError("pattern consolidator: wrong number of VMs");
    }
    // First fit, largest first, into anonymous bins.
    std::vector<double> loads;
    std::vector<std::size_t> bin(spec_.num_vms);
    for (const std::size_t l : by_demand_descending(demands)) {
        const double d = demands[l] / spec_.capacity;
        std::size_t b = 0;
        while (b < loads.size() && loads[b] + d > 1.0 + kFitSlack) {
            ++b;
        }
        if (b == loads.size()) {
            if (loads.size() < spec_.num_pms) {
                loads.push_back(0.0);
            } else {
                b = static_cast<std::size_t>(std::min_element(loads.begin(), loads.end()) - loads.begin());
            }
        }
        loads[b] += d;
        bin[l] = b;
    }

    // Greedy relabelling: the bin/PM pair sharing the most VMs is matched
    // first, so the packing keeps VMs where they already are when possible.
    const std::size_t nb = loads.size();
    std::vector<std::vector<std::size_t>> overlap(nb, std::vector<std::size_t>(spec_.num_pms, 0));
    for (std::size_t l = 0; l < spec_.num_vms; ++l) {
        ++overlap[bin[l]][current[l]];
    }
    std::vector<PmId> label(nb, spec_.num_pms);
    std::vector<bool> taken(spec_.num_pms, false);
    for (std::size_t round = 0; round < nb; ++round) {
        std::size_t best_b = nb;
        PmId best_p = 0;
        std::size_t best = 0;
        for (std::size_t b = 0; b < nb; ++b) {
            if (label[b] != spec_.num_pms) {
                continue;
            }
            for (PmId p = 0; p < spec_.num_pms; ++p) {
                if (!taken[p] && (best_b == nb || overlap[b][p] > best)) {
                    best_b = b;
                    best_p = p;
                    best = overlap[b][p];
                }
            }
        }
        label[best_b] = best_p;
        taken[best_p] = true;
    }
    Placement out;
    out.assignment.resize(spec_.num_vms);
    for (std::size_t l = 0; l < spec_.num_vms; ++l) {
        out.assignment[l] = label[bin[l]];
    }
    return out;
}

MigrationPlan PatternConsolidator::step(std::size_t slot, const Placement& current, const DemandHistory& history)
{
    validate_placement(current, spec_);
    if (history.empty()) {
        return MigrationPlan::stay(current);
    }
    if (target_.empty() || slot % options_.period == 0) {
        target_ = pack(history.window_mean(options_.window), current).assignment;
    }
    const auto latest = history.latest();
    MigrationPlan plan = overflow_moves(current, latest, spec_, spec_.max_migrations);
    std::size_t budget = spec_.max_migrations - count_migrations(current, plan);
    if (budget == 0) {
        return plan;
    }
    for (const std::size_t l : by_demand_descending(latest)) {
        if (budget == 0) {
            break;
        }
        if (plan.targets[l] == current[l] && current[l] != target_[l]) {
            plan.targets[l] = target_[l];
            --budget;
        }
    }
    return plan;
}

} // namespace madvm
