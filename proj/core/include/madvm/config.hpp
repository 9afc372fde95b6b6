#pragma once

// Simulation configuration and its JSON form. Unknown keys are rejected.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "madvm/approx.hpp"
#include "madvm/baselines.hpp"
#include "madvm/cluster.hpp"
#include "madvm/demand.hpp"

namespace madvm {

enum class ControllerKind { madvm, static_first_fit, predictive_scaler, pattern_consolidator, exact_oracle };

const char* to_string(ControllerKind kind);
ControllerKind controller_from_string(const std::string& name);

/// Which demand estimate seeds the first-fit initial placement.
enum class InitialBasis {
    prior,     // chains known after the first slot (uniform rows)
    profile,   // chains estimated from the first window of the trace
};

/// Sticky per-VM chains whose home level is redrawn every regime.
struct SyntheticTraceParams {
    std::size_t num_slots = 2000;
    std::size_t regime_slots = 432;
    double stickiness = 0.8;
    double decay = 0.3;
    LevelIndex home_min = 0;
    LevelIndex home_max = 3;
    double jitter = 0.0;   // uniform noise below each sampled level, as a fraction of the level gap
};

struct OutputPaths {
    std::string per_slot_csv;
    std::string report_json;
    std::string debug_jsonl;
};

struct SimConfig {
    ClusterSpec cluster{10, 20, 1.0, 250.0, 500.0, 50.0, 1, 1e6};
    std::vector<double> level_values;   // empty: uniform
    std::size_t level_count = 10;
    double cap_multiple = 1.0;
    std::size_t window_slots = 432;
    double slot_minutes = 10.0;
    std::uint64_t seed = 1;
    ControllerKind controller = ControllerKind::madvm;
    MadvmOptions madvm;
    PredictiveScalerOptions predictive;
    PatternConsolidatorOptions pattern;
    InitialBasis initial_basis = InitialBasis::prior;
    std::string trace_path;   // empty: synthesize
    SyntheticTraceParams synthetic;
    OutputPaths output;

    DemandLevelSet levels() const;
    void validate() const;
};

/// Parse and validate. Paths are taken verbatim; the trace file must exist.
SimConfig parse_config(const std::string& json_text);
SimConfig load_config(const std::string& path);
std::string config_to_json(const SimConfig& config);

/// The ground-truth chains and regime schedule the synthetic generator uses.
struct SyntheticModel {
    std::vector<DemandChain> initial;
    std::vector<RegimeSwitch> schedule;
    std::vector<LevelIndex> start_levels;
};

SyntheticModel synthetic_model(const SimConfig& config);
DemandTrace synthesize(const SimConfig& config);

/// The configured trace file, or a synthetic trace.
DemandTrace make_trace(const SimConfig& config);

} // namespace madvm
