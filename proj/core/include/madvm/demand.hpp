#pragma once

// Per-VM CPU demand modelling: quantization levels, first-order Markov
// chains, sliding-window estimation, stationary distributions and the
// feature state built from them.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

namespace madvm {

using LevelIndex = std::size_t;
using PmId = std::size_t;
using Distribution = std::vector<double>;

/// Ordered demand levels r_0 < r_1 < ... expressed as fractions of one PM's
/// capacity.
class DemandLevelSet {
public:
    explicit DemandLevelSet(std::vector<double> values);

    /// r_k = k / (count - 1) * cap_multiple.
    static DemandLevelSet uniform(std::size_t count, double cap_multiple = 1.0);

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](LevelIndex k) const { return values_.at(k); }
    std::span<const double> values() const noexcept { return values_; }

    /// Smallest k with r_k >= raw (round-up). Values above the top level map
    /// to the top level. Throws InputError for negative input.
    LevelIndex quantize(double raw) const;

private:
    std::vector<double> values_;
};

/// Row-stochastic transition matrix; entry (from, to) is
/// Pr[next = r_to | current = r_from].
class DemandChain {
public:
    DemandChain() = default;
    DemandChain(std::size_t num_levels, std::vector<double> row_major);

    static DemandChain identity(std::size_t num_levels);
    static DemandChain uniform(std::size_t num_levels);
    static DemandChain from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t size() const noexcept { return n_; }
    double operator()(LevelIndex from, LevelIndex to) const { return p_[from * n_ + to]; }
    std::span<const double> row(LevelIndex from) const { return {p_.data() + from * n_, n_}; }
    std::span<const double> data() const noexcept { return p_; }
    std::vector<std::vector<double>> rows() const;

    /// Same stationary distributions, but aperiodic: (P + I) / 2.
    DemandChain lazy() const;

    friend bool operator==(const DemandChain&, const DemandChain&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> p_;
};

inline constexpr double kRowSumTolerance = 1e-9;

bool is_row_stochastic(std::span<const double> row_major, std::size_t n,
                       double tol = kRowSumTolerance);

/// Windowed maximum-likelihood estimate of one VM's demand chain.
///
/// The window holds the last `window_slots` observed levels. Transition
/// j -> i is counted for every consecutive pair inside the window and the
/// visit count of j is the number of such pairs starting in j. Rows that
/// were never left inside the window fall back to the uniform row.
class SlidingWindowEstimator {
public:
    SlidingWindowEstimator(std::size_t num_levels, std::size_t window_slots);

    /// Append one observation, evict history older than the window, and
    /// return the current estimate.
    DemandChain observe(LevelIndex level);
    void push(LevelIndex level);
    DemandChain estimate() const;

    std::size_t num_levels() const noexcept { return n_; }
    std::size_t window_slots() const noexcept { return window_; }
    const std::deque<LevelIndex>& buffer() const noexcept { return buffer_; }
    bool empty() const noexcept { return buffer_.empty(); }
    LevelIndex last() const { return buffer_.back(); }

    std::uint32_t transition_count(LevelIndex from, LevelIndex to) const {
        return transitions_[from * n_ + to];
    }
    std::uint32_t visit_count(LevelIndex from) const { return visits_[from]; }

    /// Rebuild counts from the buffer and compare against the stored ones.
    bool counts_consistent() const;

private:
    std::size_t n_;
    std::size_t window_;
    std::deque<LevelIndex> buffer_;
    std::vector<std::uint32_t> transitions_;
    std::vector<std::uint32_t> visits_;
};

struct StationaryResult {
    Distribution distribution;
    std::size_t iterations = 0;
    double residual = 0.0;   // max |pi - pi P|
    bool converged = false;
};

/// Power iteration pi <- pi P from `start`. `max_iter == 0` selects the
/// default of 10 * n * 1000 iterations.
StationaryResult stationary_distribution(const DemandChain& chain, const Distribution& start,
                                         double tol = 1e-9, std::size_t max_iter = 0);

Distribution indicator(std::size_t size, LevelIndex at);

struct FeatureState {
    LevelIndex expected_level = 0;
    PmId location = 0;

    friend auto operator<=>(const FeatureState&, const FeatureState&) = default;
};

double expected_demand(const Distribution& pi, const DemandLevelSet& levels);

/// Location plus the expected demand of `pi`, rounded up to a level.
FeatureState feature_state(const Distribution& pi, const DemandLevelSet& levels, PmId location);

/// Raw per-(vm, slot) CPU demand, as a fraction of PM capacity.
struct DemandTrace {
    std::size_t num_vms = 0;
    std::size_t num_slots = 0;
    std::vector<double> demands;   // slot-major: demands[slot * num_vms + vm]

    DemandTrace() = default;
    DemandTrace(std::size_t vms, std::size_t slots);

    double at(std::size_t vm, std::size_t slot) const { return demands[slot * num_vms + vm]; }
    double& at(std::size_t vm, std::size_t slot) { return demands[slot * num_vms + vm]; }
    std::span<const double> slot(std::size_t t) const { return {demands.data() + t * num_vms, num_vms}; }

    void validate() const;

    friend bool operator==(const DemandTrace&, const DemandTrace&) = default;
};

/// Chains replaced wholesale (one per VM) starting at `slot`.
struct RegimeSwitch {
    std::size_t slot = 0;
    std::vector<DemandChain> chains;
};

/// Sample a trace from per-VM chains. Slot 0 sits at `start_levels` (level 0
/// when empty); the transition into slot t uses the chain active at t. A row
/// holding a single certain successor consumes no randomness.
DemandTrace synthesize_trace(const std::vector<DemandChain>& ground_truth,
                             const std::vector<RegimeSwitch>& schedule,
                             std::span<const LevelIndex> start_levels,
                             const DemandLevelSet& levels, std::size_t num_slots,
                             std::uint64_t seed);

/// Sticky chain pulled toward `home`: row j = s * e_j + (1 - s) * q with
/// q_i proportional to decay^|i - home|.
DemandChain sticky_chain(std::size_t num_levels, LevelIndex home, double stickiness, double decay);

} // namespace madvm
