#pragma once

// Numerical checks on the approximation: the feature mapping between the
// stacked per-VM tables and the joint state space, the approximation-error
// sandwich, decay of per-VM value iteration, and windowed transition
// matrices of a trace.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "madvm/approx.hpp"
#include "madvm/exact_mdp.hpp"

namespace madvm {

/// M maps stacked per-VM tables to joint states (row S holds the ones of
/// F(S)); the selector M_dag picks, for each column, the key state it
/// stands for.
struct MappingMatrix {
    std::size_t num_states = 0;
    std::size_t num_vms = 0;
    std::size_t block = 0;                 // Lambda * |V_s|
    std::vector<std::size_t> row_columns;  // num_states * num_vms
    std::vector<std::size_t> key_rows;     // one joint state per column
    double a = 0.0;                        // sqrt(|V_m| * N_S)

    std::size_t num_columns() const noexcept { return num_vms * block; }
    std::span<const std::size_t> row(std::size_t s) const { return {row_columns.data() + s * num_vms, num_vms}; }

    std::vector<double> apply(std::span<const double> w) const;    // M w
    std::vector<double> select(std::span<const double> v) const;   // M_dag v
    std::vector<double> dense() const;                             // row-major M
    std::vector<double> dense_selector() const;                    // row-major M_dag
};

MappingMatrix build_mapping(const ClusterSpec& spec, const DemandLevelSet& levels,
                            std::span<const FeatureState> features, std::size_t budget = kOracleStateBudget);

struct BoundReport {
    double error = 0.0;               // ||M W - V*||
    double lower = 0.0;               // ||M X* - V*||
    double upper = 0.0;               // valid only when certified
    double projection_gap = 0.0;      // ||X* - M_dag V*||
    double a = 0.0;
    std::size_t n = 0;
    double beta_contraction = 0.0;
    double c = 0.0;
    bool certified = false;
    std::vector<double> weights;      // W
    std::vector<double> projection;   // X*

    bool lower_holds(double slack = 1e-9) const { return lower <= error + slack * std::max(1.0, error); }
    bool upper_holds(double slack = 1e-9) const
    {
        return !certified || error <= upper + slack * std::max(1.0, upper);
    }
};

struct BoundCheckOptions {
    std::size_t n_max = 200;
    PerVmOptions vi{1e-12, 200000, false};
};

/// Builds W from the per-VM problems at `features`, projects V* onto the
/// feature space and searches n for the tightest certified upper bound.
/// V* is re-based so that the all-feature joint state has value zero, the
/// same normalisation every per-VM table uses.
BoundReport bound_check(const ExactModel& model, const UtilityVector& v_star, std::span<const FeatureState> features,
                        const BoundCheckOptions& options = {});

/// One blockwise sweep of every per-VM problem over a stacked vector.
std::vector<double> stacked_sweep(std::span<const PerVmProblem> problems, std::span<const double> x);

std::string bound_report_to_json(const BoundReport& report);

struct DecayReport {
    std::vector<double> differences;   // max-norm of successive iterates
    double ratio = 0.0;                // fitted geometric decay per iteration
    bool contracting = true;
    std::size_t first_below(double tol) const;   // 1-based sweep index, or 0
};

/// Requires at least three iterates.
DecayReport convergence_diagnostics(std::span<const std::vector<double>> iterates);

struct HeatmapReport {
    std::vector<std::size_t> window_end;     // last slot of each window
    std::vector<DemandChain> matrices;
    std::vector<double> window_scores;       // mean run length containing the window
    double score = 0.0;                      // mean over entries of the longest run
};

/// Run lengths of a series under greedy left-to-right segmentation where
/// every member of a run stays within epsilon of the run mean.
std::vector<std::size_t> quasi_static_runs(std::span<const double> series, double epsilon);

HeatmapReport transition_heatmap(const DemandTrace& trace, const DemandLevelSet& levels, std::size_t window,
                                 std::size_t vm, std::size_t stride, double epsilon = 0.05);

/// One row per window: window_end followed by the row-major matrix.
std::string heatmap_to_csv(const HeatmapReport& report);

} // namespace madvm
