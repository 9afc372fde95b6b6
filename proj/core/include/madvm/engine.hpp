#pragma once

// Slotted simulation: observe, quantize, decide, accrue cost on the
// pre-migration placement, then migrate.

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "madvm/config.hpp"
#include "madvm/exact_mdp.hpp"

namespace madvm {

struct SlotMetrics {
    std::size_t slot = 0;
    double power_watts = 0.0;
    double shortage_sum = 0.0;
    std::size_t migrations = 0;
    std::size_t active_pms = 0;
};

struct Aggregates {
    std::size_t slots = 0;
    double avg_power = 0.0;
    double avg_shortage_per_vm = 0.0;
    double avg_migrations = 0.0;
    double avg_active_pms = 0.0;
    double total_cost = 0.0;        // time-average of power + lambda / |V_m| * shortage
    std::size_t max_migrations = 0;
};

struct MetricsReport {
    std::string controller;
    std::size_t num_vms = 0;
    std::size_t num_pms = 0;
    double lambda = 0.0;
    std::size_t warmup_slots = 0;
    std::vector<SlotMetrics> rows;
    Aggregates full;
    Aggregates post_warmup;   // slots at or after warmup_slots
};

/// Aggregate rows [first, rows.size()).
Aggregates aggregate(std::span<const SlotMetrics> rows, std::size_t num_vms, double lambda, std::size_t first = 0);

/// Per-slot decision maker; `state` carries the quantized levels observed
/// for `slot` and the placement they were observed on.
class Controller {
public:
    virtual ~Controller() = default;
    virtual MigrationPlan decide(std::size_t slot, const SystemState& state) = 0;
};

std::unique_ptr<Controller> make_controller(const SimConfig& config, std::ostream* debug = nullptr);

/// Starting placement for the configured controller.
Placement initial_placement(const SimConfig& config, const DemandTrace& trace);

/// Re-solves the exact MDP on the estimated chains every slot.
class ExactOracleController : public Controller {
public:
    ExactOracleController(const ClusterSpec& spec, const DemandLevelSet& levels, std::size_t window_slots);
    MigrationPlan decide(std::size_t slot, const SystemState& state) override;

private:
    ClusterSpec spec_;
    DemandLevelSet levels_;
    std::vector<SlidingWindowEstimator> estimators_;
};

struct SimulationHooks {
    std::ostream* debug = nullptr;   // one JSON line per slot for MadVM
};

MetricsReport run_simulation(const SimConfig& config, const DemandTrace& trace, const SimulationHooks& hooks = {});
MetricsReport run_simulation(const SimConfig& config);

std::vector<MetricsReport> sweep_lambda(const SimConfig& config, std::span<const double> lambdas);
std::vector<MetricsReport> sweep_lambda(const SimConfig& config, const DemandTrace& trace,
                                        std::span<const double> lambdas);

/// slot,power_watts,shortage_sum,migrations,active_pms
std::string report_csv(const MetricsReport& report);
std::string report_json(const MetricsReport& report);

} // namespace madvm
