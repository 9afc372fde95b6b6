#pragma once

// MadVM: per-VM value iteration over key states, the linear utility
// decomposition, control-utility bids and the per-slot auction.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "madvm/cluster.hpp"
#include "madvm/demand.hpp"

namespace madvm {

/// Key states of one VM: every (level, PM) pair for the owner while all
/// other VMs sit at their feature states. Entry (r, y) lives at r * num_pms + y.
struct KeyStateSet {
    std::size_t owner_vm = 0;
    std::size_t num_levels = 0;
    std::size_t num_pms = 0;
    std::vector<FeatureState> context;   // one per VM, owner included

    std::size_t size() const noexcept { return num_levels * num_pms; }
    std::size_t index(LevelIndex r, PmId y) const noexcept { return r * num_pms + y; }
    LevelIndex level_of(std::size_t k) const noexcept { return k / num_pms; }
    PmId pm_of(std::size_t k) const noexcept { return k % num_pms; }

    /// The joint state denoted by key state k.
    SystemState joint_state(std::size_t k) const;
    /// Key state of the owner's own feature state.
    std::size_t reference() const { return index(context[owner_vm].expected_level, context[owner_vm].location); }
};

KeyStateSet build_key_states(std::size_t vm, std::span<const FeatureState> features, const DemandLevelSet& levels,
                             const ClusterSpec& spec);

/// The restricted MDP of one VM: costs over its key states, its own chain,
/// and its admissible targets (every PM, or only staying when T_m = 0).
class PerVmProblem {
public:
    PerVmProblem(const KeyStateSet& keys, DemandChain chain, const DemandLevelSet& levels, const ClusterSpec& spec);

    std::size_t size() const noexcept { return cost_.size(); }
    std::size_t reference() const noexcept { return reference_; }
    std::size_t num_levels() const noexcept { return levels_; }
    std::size_t num_pms() const noexcept { return pms_; }
    double cost(std::size_t k) const { return cost_[k]; }
    const DemandChain& chain() const noexcept { return chain_; }
    bool may_move() const noexcept { return may_move_; }

    /// sum_r' P[r][r'] v(r', target)
    double expected_next(std::span<const double> v, LevelIndex r, PmId target) const;

    /// One relative value-iteration sweep from `in` into `out`, pinning the
    /// reference to zero. Returns the pre-subtraction value at the reference.
    double sweep(std::span<const double> in, std::span<double> out, std::uint64_t* evaluations = nullptr) const;

private:
    DemandChain chain_;
    std::size_t levels_;
    std::size_t pms_;
    std::size_t reference_;
    bool may_move_;
    std::vector<double> cost_;
};

struct PerVmOptions {
    double tol = 1e-6;
    std::size_t max_iter = 1000;
    bool record_trace = false;
};

struct PerVMUtility {
    std::size_t owner_vm = 0;
    std::size_t num_levels = 0;
    std::size_t num_pms = 0;
    std::vector<double> table;   // (r, y) at r * num_pms + y
    std::size_t reference = 0;
    double beta = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::uint64_t evaluations = 0;           // (state, action) pairs evaluated
    std::vector<double> spans;               // per sweep
    std::vector<std::vector<double>> trace;  // table after each sweep, when recorded

    double operator()(LevelIndex r, PmId y) const { return table[r * num_pms + y]; }
};

/// Relative value iteration on one VM's key states. Starts from zero unless
/// `initial` is given.
PerVMUtility per_vm_value_iteration(const PerVmProblem& problem, std::size_t owner_vm,
                                    const PerVmOptions& options = {},
                                    std::span<const double> initial = {});

PerVMUtility per_vm_value_iteration(const KeyStateSet& keys, const DemandChain& chain, const DemandLevelSet& levels,
                                    const ClusterSpec& spec, const PerVmOptions& options = {});

/// All per-VM tables stacked in VM order.
struct WeightVector {
    std::size_t num_vms = 0;
    std::size_t block = 0;   // Lambda * |V_s|
    std::size_t num_pms = 0;
    std::vector<double> values;

    static WeightVector from_tables(std::span<const PerVMUtility> tables);

    /// Column of the indicator 1[R_l = r, Y_l = y].
    std::size_t column(std::size_t vm, LevelIndex r, PmId y) const { return vm * block + r * num_pms + y; }
};

/// Positions of the ones in the feature vector F(S).
std::vector<std::size_t> feature_columns(const SystemState& state, const WeightVector& weights);

/// W^T F(S) = sum_l V_l(R_l, Y_l)
double approximate_joint_utility(const WeightVector& weights, const SystemState& state);

struct ControlBid {
    std::size_t vm = 0;
    double control_utility = 0.0;   // minimum over targets
    double stay_value = 0.0;
    PmId best_target = 0;
    double gain = 0.0;              // stay_value - control_utility, 0 when staying
};

/// Evaluate g(S(t)) + sum_r' P[R_l][r'] V_l(r', target) for every admissible
/// target. Ties keep the current PM, otherwise the smallest PM id wins.
ControlBid control_utility(std::size_t vm, const SystemState& current, double current_cost,
                           const PerVMUtility& table, const DemandChain& chain, const ClusterSpec& spec);

enum class Ranking {
    gain_descending,
    utility_ascending,
    utility_descending,
};

/// Grant moves to at most T_m VMs with positive gain, ordered by `ranking`
/// and then by VM id.
MigrationPlan select_migrations(std::span<const ControlBid> bids, const Placement& current,
                                std::size_t max_migrations, Ranking ranking = Ranking::gain_descending);

enum class Mode { centralized, distributed };

/// What one VM shares with its peers in distributed mode.
struct Broadcast {
    std::size_t vm = 0;
    FeatureState feature;
    LevelIndex level = 0;
    PmId location = 0;
};

struct MessageLog {
    std::vector<Broadcast> messages;
};

struct MadvmOptions {
    PerVmOptions vi;
    Ranking ranking = Ranking::gain_descending;
    Mode mode = Mode::centralized;
    bool warm_start = false;
    double stationary_tol = 1e-9;
};

/// Per-slot debug record.
struct StepRecord {
    std::vector<FeatureState> features;
    std::vector<ControlBid> bids;
    std::vector<std::size_t> iterations;
    MigrationPlan plan;
};

std::string step_record_to_json(const StepRecord& record);

/// One MadVM slot: update each VM's chain with its observed level, derive
/// feature states, share them, solve every per-VM problem, bid and select.
/// `tables` carries warm-start values between slots when enabled.
MigrationPlan madvm_step(const SystemState& current, std::span<SlidingWindowEstimator> estimators,
                         const DemandLevelSet& levels, const ClusterSpec& spec, const MadvmOptions& options,
                         MessageLog* log = nullptr, StepRecord* record = nullptr,
                         std::vector<std::vector<double>>* tables = nullptr);

/// Feature state of a VM given its estimated chain, current level and location.
FeatureState estimate_feature(const DemandChain& chain, LevelIndex level, PmId location,
                              const DemandLevelSet& levels, double tol = 1e-9);

class MadvmController {
public:
    MadvmController(const ClusterSpec& spec, const DemandLevelSet& levels, std::size_t window_slots,
                    MadvmOptions options = {});

    MigrationPlan step(const SystemState& current);

    const MessageLog& messages() const noexcept { return log_; }
    const StepRecord& last_record() const noexcept { return record_; }
    std::span<const SlidingWindowEstimator> estimators() const noexcept { return estimators_; }
    const MadvmOptions& options() const noexcept { return options_; }

private:
    ClusterSpec spec_;
    DemandLevelSet levels_;
    MadvmOptions options_;
    std::vector<SlidingWindowEstimator> estimators_;
    std::vector<std::vector<double>> tables_;
    MessageLog log_;
    StepRecord record_;
};

} // namespace madvm
