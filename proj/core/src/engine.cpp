#include "madvm/engine.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include <nlohmann/json.hpp>

#include "madvm/errors.hpp"

namespace madvm {

namespace {

std::vector<double> level_values(const SystemState& state, const DemandLevelSet& levels)
{
    std::vector<double> out(state.levels.size());
    for (std::size_t l = 0; l < out.size(); ++l) {
        out[l] = levels[state.levels[l]];
    }
    return out;
}

double stationary_expectation(const DemandChain& chain, LevelIndex start, const DemandLevelSet& levels)
{
    const Distribution init = indicator(chain.size(), start);
    StationaryResult pi = stationary_distribution(chain, init);
    if (!pi.converged) {
        pi = stationary_distribution(chain.lazy(), init);
    }
    return expected_demand(pi.distribution, levels);
}

class StaticController : public Controller {
public:
    MigrationPlan decide(std::size_t, const SystemState& state) override { return MigrationPlan::stay(state.placement); }
};

class MadvmAdapter : public Controller {
public:
    MadvmAdapter(const SimConfig& config, std::ostream* debug)
        : controller_(config.cluster, config.levels(), config.window_slots, config.madvm), debug_(debug)
    {
    }

    MigrationPlan decide(std::size_t slot, const SystemState& state) override
    {
        MigrationPlan plan = controller_.step(state);
        if (debug_ != nullptr) {
            *debug_ << "{\"slot\":" << slot << ",\"record\":" << step_record_to_json(controller_.last_record())
                    << "}\n";
        }
        return plan;
    }

private:
    MadvmController controller_;
    std::ostream* debug_;
};

class PredictiveAdapter : public Controller {
public:
    explicit PredictiveAdapter(const SimConfig& config)
        : spec_(config.cluster), levels_(config.levels()), options_(config.predictive),
          history_(config.cluster.num_vms, config.predictive.window)
    {
    }

    MigrationPlan decide(std::size_t, const SystemState& state) override
    {
        history_.push(level_values(state, levels_));
        return predictive_scaler_step(state.placement, history_, spec_, options_);
    }

private:
    ClusterSpec spec_;
    DemandLevelSet levels_;
    PredictiveScalerOptions options_;
    DemandHistory history_;
};

class PatternAdapter : public Controller {
public:
    explicit PatternAdapter(const SimConfig& config)
        : levels_(config.levels()), consolidator_(config.cluster, config.pattern),
          history_(config.cluster.num_vms, config.pattern.window)
    {
    }

    MigrationPlan decide(std::size_t slot, const SystemState& state) override
    {
        history_.push(level_values(state, levels_));
        return consolidator_.step(slot, state.placement, history_);
    }

private:
    DemandLevelSet levels_;
    PatternConsolidator consolidator_;
    DemandHistory history_;
};

void write_aggregates(nlohmann::json& j, const Aggregates& a)
{
    j = {{"slots", a.slots},
         {"avg_power", a.avg_power},
         {"avg_shortage_per_vm", a.avg_shortage_per_vm},
         {"avg_migrations", a.avg_migrations},
         {"avg_active_pms", a.avg_active_pms},
         {"total_cost", a.total_cost},
         {"max_migrations", a.max_migrations}};
}

} // namespace

Aggregates aggregate(std::span<const SlotMetrics> rows, std::size_t num_vms, double lambda, std::size_t first)
{
    Aggregates a;
    if (first >= rows.size()) {
        return a;
    }
    const double weight = lambda / static_cast<double>(num_vms);
    for (std::size_t k = first; k < rows.size(); ++k) {
        const auto& r = rows[k];
        a.avg_power += r.power_watts;
        a.avg_shortage_per_vm += r.shortage_sum;
        a.avg_migrations += static_cast<double>(r.migrations);
        a.avg_active_pms += static_cast<double>(r.active_pms);
        a.total_cost += r.power_watts + weight * r.shortage_sum;
        a.max_migrations = std::max(a.max_migrations, r.migrations);
    }
    a.slots = rows.size() - first;
    const double t = static_cast<double>(a.slots);
    a.avg_power /= t;
    a.avg_shortage_per_vm /= t * static_cast<double>(num_vms);
    a.avg_migrations /= t;
    a.avg_active_pms /= t;
    a.total_cost /= t;
    return a;
}

ExactOracleController::ExactOracleController(const ClusterSpec& spec, const DemandLevelSet& levels,
                                             std::size_t window_slots)
    : spec_(spec), levels_(levels)
{
    // Refuse oversized instances before the first slot.
    JointStateSpace(spec.num_vms, spec.num_pms, levels.size());
    for (std::size_t l = 0; l < spec.num_vms; ++l) {
        estimators_.emplace_back(levels.size(), window_slots);
    }
}

MigrationPlan ExactOracleController::decide(std::size_t, const SystemState& state)
{
    std::vector<DemandChain> chains;
    for (std::size_t l = 0; l < spec_.num_vms; ++l) {
        chains.push_back(estimators_[l].observe(state.levels[l]));
    }
    const ExactModel model(std::move(chains), spec_, levels_);
    const UtilityVector v = value_iteration(model);
    const Policy policy = extract_policy(model, v, TieBreak::prefer_stay);
    return policy.actions[model.space().pack(state)];
}

std::unique_ptr<Controller> make_controller(const SimConfig& config, std::ostream* debug)
{
    switch (config.controller) {
    case ControllerKind::madvm: return std::make_unique<MadvmAdapter>(config, debug);
    case ControllerKind::static_first_fit: return std::make_unique<StaticController>();
    case ControllerKind::predictive_scaler: return std::make_unique<PredictiveAdapter>(config);
    case ControllerKind::pattern_consolidator: return std::make_unique<PatternAdapter>(config);
    case ControllerKind::exact_oracle:
        return std::make_unique<ExactOracleController>(config.cluster, config.levels(), config.window_slots);
    }
    throw InputError("unknown controller");
}

Placement initial_placement(const SimConfig& config, const DemandTrace& trace)
{
    const DemandLevelSet levels = config.levels();
    const std::size_t vms = config.cluster.num_vms;
    const std::size_t horizon =
        config.initial_basis == InitialBasis::profile ? std::min(config.window_slots, trace.num_slots) : 1;

    if (config.controller == ControllerKind::pattern_consolidator) {
        DemandHistory history(vms, horizon);
        for (std::size_t t = 0; t < horizon; ++t) {
            std::vector<double> row(vms);
            for (std::size_t l = 0; l < vms; ++l) {
                row[l] = levels[levels.quantize(trace.at(l, t))];
            }
            history.push(row);
        }
        const PatternConsolidator packer(config.cluster, config.pattern);
        const Placement origin{std::vector<PmId>(vms, 0)};
        return packer.pack(history.window_mean(horizon), origin);
    }

    std::vector<double> expected(vms);
    for (std::size_t l = 0; l < vms; ++l) {
        SlidingWindowEstimator est(levels.size(), std::max<std::size_t>(config.window_slots, 2));
        for (std::size_t t = 0; t < horizon; ++t) {
            est.push(levels.quantize(trace.at(l, t)));
        }
        expected[l] = stationary_expectation(est.estimate(), levels.quantize(trace.at(l, 0)), levels);
    }
    return static_first_fit(expected, config.cluster);
}

MetricsReport run_simulation(const SimConfig& config, const DemandTrace& trace, const SimulationHooks& hooks)
{
    config.validate();
    trace.validate();
    const ClusterSpec& spec = config.cluster;
    if (trace.num_vms != spec.num_vms) {
        throw InputError("trace has " + std::to_string(trace.num_vms) + " VMs, config expects " +
                         std::to_string(spec.num_vms));
    }
    const DemandLevelSet levels = config.levels();

    MetricsReport report;
    report.controller = to_string(config.controller);
    report.num_vms = spec.num_vms;
    report.num_pms = spec.num_pms;
    report.lambda = spec.lambda;
    report.warmup_slots = config.window_slots;
    report.rows.reserve(trace.num_slots);

    auto controller = make_controller(config, hooks.debug);
    SystemState state;
    state.placement = initial_placement(config, trace);
    state.levels.resize(spec.num_vms);
    for (std::size_t t = 0; t < trace.num_slots; ++t) {
        for (std::size_t l = 0; l < spec.num_vms; ++l) {
            state.levels[l] = levels.quantize(trace.at(l, t));
        }
        const MigrationPlan plan = controller->decide(t, state);
        if (plan.targets.size() != spec.num_vms) {
            throw InvariantViolation("controller returned a plan of the wrong size");
        }
        for (const PmId p : plan.targets) {
            if (p >= spec.num_pms) {
                throw InvariantViolation("controller targeted a PM that does not exist");
            }
        }
        const std::size_t moved = count_migrations(state.placement, plan);
        if (moved > spec.max_migrations) {
            throw InvariantViolation("slot " + std::to_string(t) + ": controller migrated " + std::to_string(moved) +
                                     " VMs, cap is " + std::to_string(spec.max_migrations));
        }

        SlotMetrics row;
        row.slot = t;
        row.power_watts = total_power(state, levels, spec);
        for (const double theta : shortage_vector(state, levels, spec)) {
            row.shortage_sum += theta;
        }
        row.migrations = moved;
        row.active_pms = active_pms(state.placement, spec);
        report.rows.push_back(row);

        state.placement = apply_migrations(state, plan, spec);
    }
    report.full = aggregate(report.rows, spec.num_vms, spec.lambda);
    report.post_warmup = aggregate(report.rows, spec.num_vms, spec.lambda, report.warmup_slots);
    return report;
}

MetricsReport run_simulation(const SimConfig& config)
{
    return run_simulation(config, make_trace(config));
}

std::vector<MetricsReport> sweep_lambda(const SimConfig& config, const DemandTrace& trace,
                                        std::span<const double> lambdas)
{
    if (lambdas.empty()) {
        throw InputError("sweep_lambda: empty lambda list");
    }
    std::vector<MetricsReport> out;
    for (const double lambda : lambdas) {
        SimConfig c = config;
        c.cluster.lambda = lambda;
        out.push_back(run_simulation(c, trace));
    }
    return out;
}

std::vector<MetricsReport> sweep_lambda(const SimConfig& config, std::span<const double> lambdas)
{
    return sweep_lambda(config, make_trace(config), lambdas);
}

std::string report_csv(const MetricsReport& report)
{
    std::string out = "slot,power_watts,shortage_sum,migrations,active_pms\n";
    char buf[128];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.9f,%zu,%zu\n", r.slot, r.power_watts, r.shortage_sum,
                      r.migrations, r.active_pms);
        out += buf;
    }
    return out;
}

std::string report_json(const MetricsReport& report)
{
    nlohmann::json j;
    j["controller"] = report.controller;
    j["num_vms"] = report.num_vms;
    j["num_pms"] = report.num_pms;
    j["lambda"] = report.lambda;
    j["warmup_slots"] = report.warmup_slots;
    write_aggregates(j["full"], report.full);
    write_aggregates(j["post_warmup"], report.post_warmup);
    return j.dump(2);
}

} // namespace madvm
