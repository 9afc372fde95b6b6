#pragma once

// Comparison controllers: a static first-fit packing, a shortage-avoiding
// predictive scaler, and a periodic pattern-based consolidator.

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "madvm/cluster.hpp"

namespace madvm {

/// VMs in id order onto the lowest-id PM whose load stays within capacity;
/// a VM that fits nowhere goes to the least-loaded PM (lowest id on ties).
Placement static_first_fit(std::span<const double> expected_demands, const ClusterSpec& spec);

/// Rolling per-VM record of observed demand fractions.
class DemandHistory {
public:
    DemandHistory(std::size_t num_vms, std::size_t capacity_slots);

    void push(std::span<const double> demands);

    std::size_t num_vms() const noexcept { return rows_.empty() ? 0 : rows_.front().size(); }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }

    /// Maximum over the most recent `window` slots (fewer when younger).
    std::vector<double> window_max(std::size_t window) const;
    std::vector<double> window_mean(std::size_t window) const;
    std::span<const double> latest() const { return rows_.back(); }

private:
    std::size_t vms_;
    std::size_t capacity_;
    std::deque<std::vector<double>> rows_;
};

/// For every PM whose predicted load exceeds capacity, move its largest
/// predicted VM to the first PM with room for it, until the cap is reached.
MigrationPlan overflow_moves(const Placement& current, std::span<const double> predicted, const ClusterSpec& spec,
                             std::size_t budget);

struct PredictiveScalerOptions {
    std::size_t window = 18;
};

/// Predict each VM's next demand as its recent window maximum and relieve
/// predicted overloads. Never consolidates.
MigrationPlan predictive_scaler_step(const Placement& current, const DemandHistory& history,
                                     const ClusterSpec& spec, const PredictiveScalerOptions& options = {});

struct PatternConsolidatorOptions {
    std::size_t period = 144;
    std::size_t window = 144;   // slots averaged for the packing
};

/// Re-packs every `period` slots by first fit on windowed mean demand,
/// placing larger VMs first, and walks toward the packing at most T_m moves
/// per slot. Observed overloads are relieved with the overflow rule.
class PatternConsolidator {
public:
    PatternConsolidator(const ClusterSpec& spec, PatternConsolidatorOptions options = {});

    /// `slot` counts from zero; history must already include the slot.
    MigrationPlan step(std::size_t slot, const Placement& current, const DemandHistory& history);

    /// First-fit packing on `demands`, largest first, with bins relabelled
    /// to the PMs that already hold most of their members.
    Placement pack(std::span<const double> demands, const Placement& current) const;

    const std::vector<PmId>& target() const noexcept { return target_; }

private:
    ClusterSpec spec_;
    PatternConsolidatorOptions options_;
    std::vector<PmId> target_;
};

} // namespace madvm
