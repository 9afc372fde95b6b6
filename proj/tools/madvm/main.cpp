// madvm: simulate, generate traces, analyze windows, run the exact oracle
// and the approximation-error check from the command line.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "madvm/analysis.hpp"
#include "madvm/config.hpp"
#include "madvm/engine.hpp"
#include "madvm/errors.hpp"
#include "madvm/exact_mdp.hpp"
#include "madvm/trace_io.hpp"

namespace {

using namespace madvm;

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write '" + path + "'");
    }
    out << text;
}

// Ground-truth chains for synthetic configs; otherwise the chains estimated
// over the first window of the trace.
std::vector<DemandChain> model_chains(const SimConfig& config, std::vector<LevelIndex>& start)
{
    const DemandLevelSet levels = config.levels();
    if (config.trace_path.empty()) {
        SyntheticModel m = synthetic_model(config);
        start = m.start_levels;
        return m.initial;
    }
    const DemandTrace trace = load_trace(config.trace_path);
    if (trace.num_vms != config.cluster.num_vms) {
        throw InputError("trace VM count does not match the config");
    }
    std::vector<DemandChain> chains;
    start.assign(trace.num_vms, 0);
    for (std::size_t l = 0; l < trace.num_vms; ++l) {
        SlidingWindowEstimator est(levels.size(), config.window_slots);
        for (std::size_t t = 0; t < std::min(config.window_slots, trace.num_slots); ++t) {
            est.push(levels.quantize(trace.at(l, t)));
        }
        start[l] = levels.quantize(trace.at(l, 0));
        chains.push_back(est.estimate());
    }
    return chains;
}

int cmd_simulate(const std::string& config_path, std::string csv, std::string json, std::string debug)
{
    const SimConfig config = load_config(config_path);
    csv = csv.empty() ? config.output.per_slot_csv : csv;
    json = json.empty() ? config.output.report_json : json;
    debug = debug.empty() ? config.output.debug_jsonl : debug;

    const DemandTrace trace = make_trace(config);
    std::ofstream debug_out;
    SimulationHooks hooks;
    if (!debug.empty()) {
        debug_out.open(debug, std::ios::binary);
        if (!debug_out) {
            throw InputError("cannot write '" + debug + "'");
        }
        hooks.debug = &debug_out;
    }
    const MetricsReport report = run_simulation(config, trace, hooks);
    if (!csv.empty()) {
        write_file(csv, report_csv(report));
    }
    const std::string text = report_json(report);
    if (!json.empty()) {
        write_file(json, text + "\n");
    }
    std::cout << text << '\n';
    return 0;
}

int cmd_gen_trace(const std::string& config_path, const std::string& out)
{
    const SimConfig config = load_config(config_path);
    const DemandTrace trace = synthesize(config);
    save_trace(out, trace);
    std::cout << "wrote " << trace.num_vms << " VMs x " << trace.num_slots << " slots to " << out << '\n';
    return 0;
}

int cmd_analyze(const std::string& trace_path, std::size_t window, std::size_t vm, std::size_t stride,
                std::size_t level_count, double cap_multiple, double epsilon, const std::string& out)
{
    const DemandTrace trace = load_trace(trace_path);
    const DemandLevelSet levels = DemandLevelSet::uniform(level_count, cap_multiple);
    const HeatmapReport report = transition_heatmap(trace, levels, window, vm, stride, epsilon);
    if (!out.empty()) {
        write_file(out, heatmap_to_csv(report));
    }
    nlohmann::json j;
    j["vm"] = vm;
    j["window"] = window;
    j["windows"] = report.matrices.size();
    j["score"] = report.score;
    double lo = report.window_scores.empty() ? 0.0 : report.window_scores.front();
    std::size_t at = report.window_end.empty() ? 0 : report.window_end.front();
    for (std::size_t w = 0; w < report.window_scores.size(); ++w) {
        if (report.window_scores[w] < lo) {
            lo = report.window_scores[w];
            at = report.window_end[w];
        }
    }
    j["min_window_score"] = lo;
    j["min_window_end"] = at;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_oracle(const std::string& config_path, const std::string& out)
{
    const SimConfig config = load_config(config_path);
    std::vector<LevelIndex> start;
    auto chains = model_chains(config, start);
    const ExactModel model(std::move(chains), config.cluster, config.levels());
    const UtilityVector v = value_iteration(model);
    const Policy policy = extract_policy(model, v);
    const std::string text = oracle_to_json(model, v, policy);
    if (!out.empty()) {
        write_file(out, text + "\n");
        std::printf("beta %.9f after %zu sweeps%s; wrote %s\n", v.beta, v.iterations,
                    v.converged ? "" : " (not converged)", out.c_str());
    } else {
        std::cout << text << '\n';
    }
    return v.converged ? 0 : 2;
}

int cmd_bound_check(const std::string& config_path, std::size_t n_max)
{
    const SimConfig config = load_config(config_path);
    const DemandLevelSet levels = config.levels();
    std::vector<LevelIndex> start;
    auto chains = model_chains(config, start);
    const ExactModel model(chains, config.cluster, levels);

    std::vector<double> expected;
    std::vector<FeatureState> features;
    for (std::size_t l = 0; l < chains.size(); ++l) {
        const FeatureState f = estimate_feature(chains[l], start[l], 0, levels);
        expected.push_back(levels[f.expected_level]);
    }
    const Placement place = static_first_fit(expected, config.cluster);
    for (std::size_t l = 0; l < chains.size(); ++l) {
        features.push_back(estimate_feature(chains[l], start[l], place[l], levels));
    }
    ValueIterationOptions vo;
    vo.tol = 1e-12;
    vo.max_iter = 200000;
    const UtilityVector v = value_iteration(model, vo);
    BoundCheckOptions bo;
    bo.n_max = n_max;
    const BoundReport report = bound_check(model, v, features, bo);
    std::cout << bound_report_to_json(report) << '\n';
    return report.lower_holds() && report.upper_holds() ? 0 : 2;
}

int cmd_sweep(const std::string& config_path, const std::vector<double>& lambdas)
{
    const SimConfig config = load_config(config_path);
    const auto reports = sweep_lambda(config, lambdas);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : reports) {
        out.push_back(nlohmann::json::parse(report_json(r)));
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Energy-aware VM placement simulator"};
    app.require_subcommand(1);

    std::string config;
    std::string csv;
    std::string json;
    std::string debug;
    auto* simulate = app.add_subcommand("simulate", "Run one simulation and print the aggregate report");
    simulate->add_option("--config", config, "JSON config")->required();
    simulate->add_option("--csv", csv, "Per-slot CSV output (overrides config)");
    simulate->add_option("--report", json, "Aggregate JSON output (overrides config)");
    simulate->add_option("--debug", debug, "Per-slot MadVM debug lines (JSONL)");

    std::string out;
    auto* gen = app.add_subcommand("gen-trace", "Write the configured synthetic trace as CSV");
    gen->add_option("--config", config, "JSON config")->required();
    gen->add_option("--out", out, "Output CSV")->required();

    std::string trace;
    std::size_t window = 432;
    std::size_t vm = 0;
    std::size_t stride = 1;
    std::size_t level_count = 10;
    double cap_multiple = 1.0;
    double epsilon = 0.05;
    auto* analyze = app.add_subcommand("analyze", "Windowed transition matrices of one VM");
    analyze->add_option("--trace", trace, "Trace CSV")->required();
    analyze->add_option("--window", window, "Window length in slots")->required();
    analyze->add_option("--vm", vm, "VM id");
    analyze->add_option("--stride", stride, "Slots between windows");
    analyze->add_option("--levels", level_count, "Number of demand levels");
    analyze->add_option("--cap-multiple", cap_multiple, "Top level as a fraction of PM capacity");
    analyze->add_option("--epsilon", epsilon, "Run tolerance for the quasi-static score");
    analyze->add_option("--out", out, "Heatmap CSV output");

    auto* oracle = app.add_subcommand("oracle", "Solve the exact MDP (tiny instances only)");
    oracle->add_option("--config", config, "JSON config")->required();
    oracle->add_option("--out", out, "JSON output");

    std::size_t n_max = 200;
    auto* bound = app.add_subcommand("bound-check", "Check the approximation-error sandwich");
    bound->add_option("--config", config, "JSON config")->required();
    bound->add_option("--n-max", n_max, "Largest iteration count searched");

    std::vector<double> lambdas;
    auto* sweep = app.add_subcommand("sweep", "Run the config once per shortage weight");
    sweep->add_option("--config", config, "JSON config")->required();
    sweep->add_option("--lambdas", lambdas, "Comma-separated weights")->required()->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*simulate) return cmd_simulate(config, csv, json, debug);
        if (*gen) return cmd_gen_trace(config, out);
        if (*analyze) return cmd_analyze(trace, window, vm, stride, level_count, cap_multiple, epsilon, out);
        if (*oracle) return cmd_oracle(config, out);
        if (*bound) return cmd_bound_check(config, n_max);
        if (*sweep) return cmd_sweep(config, lambdas);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::logic_error& e) {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
