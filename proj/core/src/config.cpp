#include "madvm/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <nlohmann/json.hpp>

#include "madvm/errors.hpp"
#include "madvm/trace_io.hpp"
#include "rng.hpp"

namespace madvm {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where)
{
    if (!j.is_object()) {
        throw InputError("config: '" + where + "' must be an object");
    }
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed)
{
    require_object(j, where);
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* a : allowed) {
            known = known || it.key() == a;
        }
        if (!known) {
            throw InputError("config: unknown key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
        }
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where)
{
    if (!j.contains(key)) {
        return;
    }
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InputError("config: '" + where + "." + key + "' has the wrong type");
    }
}

void read_count(const json& j, const char* key, std::size_t& out, const std::string& where)
{
    if (!j.contains(key)) {
        return;
    }
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw InputError("config: '" + where + "." + key + "' must be a non-negative integer");
    }
    out = v.get<std::size_t>();
}

Ranking ranking_from_string(const std::string& s)
{
    if (s == "gain_descending") return Ranking::gain_descending;
    if (s == "utility_ascending") return Ranking::utility_ascending;
    if (s == "utility_descending") return Ranking::utility_descending;
    throw InputError("config: unknown ranking '" + s + "'");
}

const char* ranking_name(Ranking r)
{
    switch (r) {
    case Ranking::gain_descending: return "gain_descending";
    case Ranking::utility_ascending: return "utility_ascending";
    case Ranking::utility_descending: return "utility_descending";
    }
    return "gain_descending";
}

} // namespace

const char* to_string(ControllerKind kind)
{
    switch (kind) {
    case ControllerKind::madvm: return "madvm";
    case ControllerKind::static_first_fit: return "static_first_fit";
    case ControllerKind::predictive_scaler: return "predictive_scaler";
    case ControllerKind::pattern_consolidator: return "pattern_consolidator";
    case ControllerKind::exact_oracle: return "exact_oracle";
    }
    return "madvm";
}

ControllerKind controller_from_string(const std::string& name)
{
    for (const auto k : {ControllerKind::madvm, ControllerKind::static_first_fit, ControllerKind::predictive_scaler,
                         ControllerKind::pattern_consolidator, ControllerKind::exact_oracle}) {
        if (name == to_string(k)) {
            return k;
        }
    }
    throw InputError("config: unknown controller '" + name + "'");
}

DemandLevelSet SimConfig::levels() const
{
    if (!level_values.empty()) {
        return DemandLevelSet(level_values);
    }
    return DemandLevelSet::uniform(level_count, cap_multiple);
}

void SimConfig::validate() const
{
    cluster.validate();
    const DemandLevelSet lv = levels();
    if (!level_values.empty() && level_values.size() != level_count) {
        throw InputError("config: levels.count disagrees with levels.values");
    }
    if (window_slots < 2) {
        throw InputError("config: window_slots must be at least 2");
    }
    if (!(slot_minutes > 0.0)) {
        throw InputError("config: slot_minutes must be positive");
    }
    if (!(madvm.vi.tol > 0.0) || madvm.vi.max_iter == 0) {
        throw InputError("config: madvm tol and max_iter must be positive");
    }
    if (pattern.period == 0 || pattern.window == 0 || predictive.window == 0) {
        throw InputError("config: baseline windows and period must be positive");
    }
    if (trace_path.empty()) {
        const auto& s = synthetic;
        if (s.num_slots == 0 || s.regime_slots == 0) {
            throw InputError("config: synthetic num_slots and regime_slots must be positive");
        }
        if (s.home_min > s.home_max || s.home_max >= lv.size()) {
            throw InputError("config: synthetic home levels out of range");
        }
        if (!(s.stickiness >= 0.0 && s.stickiness <= 1.0) || !(s.decay > 0.0)) {
            throw InputError("config: synthetic stickiness must lie in [0,1] and decay be positive");
        }
        if (!(s.jitter >= 0.0 && s.jitter < 1.0)) {
            throw InputError("config: synthetic jitter must lie in [0,1)");
        }
    } else if (!std::filesystem::exists(trace_path)) {
        throw InputError("config: trace file '" + trace_path + "' does not exist");
    }
}

SimConfig parse_config(const std::string& json_text)
{
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("config: invalid JSON: ") + e.what());
    }
    reject_unknown(root, "", {"cluster", "levels", "window_slots", "slot_minutes", "seed", "controller", "madvm",
                              "predictive_scaler", "pattern_consolidator", "initial_placement", "trace", "output"});
    SimConfig c;
    bool cap_given = false;
    bool home_max_given = false;
    if (root.contains("cluster")) {
        const json& j = root["cluster"];
        reject_unknown(j, "cluster",
                       {"num_pms", "num_vms", "capacity", "p_idle", "p_max", "p_sleep", "max_migrations", "lambda"});
        read_count(j, "num_pms", c.cluster.num_pms, "cluster");
        read_count(j, "num_vms", c.cluster.num_vms, "cluster");
        read(j, "capacity", c.cluster.capacity, "cluster");
        read(j, "p_idle", c.cluster.p_idle, "cluster");
        read(j, "p_max", c.cluster.p_max, "cluster");
        read(j, "p_sleep", c.cluster.p_sleep, "cluster");
        read(j, "lambda", c.cluster.lambda, "cluster");
        cap_given = j.contains("max_migrations");
        read_count(j, "max_migrations", c.cluster.max_migrations, "cluster");
    }
    if (!cap_given) {
        c.cluster.max_migrations = default_max_migrations(c.cluster.num_vms);
    }
    if (root.contains("levels")) {
        const json& j = root["levels"];
        reject_unknown(j, "levels", {"count", "cap_multiple", "values"});
        read_count(j, "count", c.level_count, "levels");
        read(j, "cap_multiple", c.cap_multiple, "levels");
        read(j, "values", c.level_values, "levels");
        if (!c.level_values.empty() && !j.contains("count")) {
            c.level_count = c.level_values.size();
        }
    }
    read_count(root, "window_slots", c.window_slots, "");
    read(root, "slot_minutes", c.slot_minutes, "");
    read(root, "seed", c.seed, "");
    if (root.contains("controller")) {
        std::string name;
        read(root, "controller", name, "");
        c.controller = controller_from_string(name);
    }
    if (root.contains("madvm")) {
        const json& j = root["madvm"];
        reject_unknown(j, "madvm", {"tol", "max_iter", "warm_start", "ranking", "mode"});
        read(j, "tol", c.madvm.vi.tol, "madvm");
        read_count(j, "max_iter", c.madvm.vi.max_iter, "madvm");
        read(j, "warm_start", c.madvm.warm_start, "madvm");
        if (j.contains("ranking")) {
            std::string r;
            read(j, "ranking", r, "madvm");
            c.madvm.ranking = ranking_from_string(r);
        }
        if (j.contains("mode")) {
            std::string m;
            read(j, "mode", m, "madvm");
            if (m == "centralized") {
                c.madvm.mode = Mode::centralized;
            } else if (m == "distributed") {
                c.madvm.mode = Mode::distributed;
            } else {
                throw InputError("config: unknown madvm mode '" + m + "'");
            }
        }
    }
    if (root.contains("predictive_scaler")) {
        const json& j = root["predictive_scaler"];
        reject_unknown(j, "predictive_scaler", {"window"});
        read_count(j, "window", c.predictive.window, "predictive_scaler");
    }
    if (root.contains("pattern_consolidator")) {
        const json& j = root["pattern_consolidator"];
        reject_unknown(j, "pattern_consolidator", {"period", "window"});
        read_count(j, "period", c.pattern.period, "pattern_consolidator");
        read_count(j, "window", c.pattern.window, "pattern_consolidator");
    }
    if (root.contains("initial_placement")) {
        std::string basis;
        read(root, "initial_placement", basis, "");
        if (basis == "prior") {
            c.initial_basis = InitialBasis::prior;
        } else if (basis == "profile") {
            c.initial_basis = InitialBasis::profile;
        } else {
            throw InputError("config: unknown initial_placement '" + basis + "'");
        }
    }
    if (root.contains("trace")) {
        const json& j = root["trace"];
        reject_unknown(j, "trace", {"path", "synthetic"});
        read(j, "path", c.trace_path, "trace");
        if (j.contains("synthetic")) {
            const json& s = j["synthetic"];
            reject_unknown(s, "trace.synthetic",
                           {"num_slots", "regime_slots", "stickiness", "decay", "home_min", "home_max", "jitter"});
            read_count(s, "num_slots", c.synthetic.num_slots, "trace.synthetic");
            read_count(s, "regime_slots", c.synthetic.regime_slots, "trace.synthetic");
            read(s, "stickiness", c.synthetic.stickiness, "trace.synthetic");
            read(s, "decay", c.synthetic.decay, "trace.synthetic");
            read_count(s, "home_min", c.synthetic.home_min, "trace.synthetic");
            home_max_given = s.contains("home_max");
            read_count(s, "home_max", c.synthetic.home_max, "trace.synthetic");
            read(s, "jitter", c.synthetic.jitter, "trace.synthetic");
        }
    }
    if (root.contains("output")) {
        const json& j = root["output"];
        reject_unknown(j, "output", {"per_slot_csv", "report_json", "debug_jsonl"});
        read(j, "per_slot_csv", c.output.per_slot_csv, "output");
        read(j, "report_json", c.output.report_json, "output");
        read(j, "debug_jsonl", c.output.debug_jsonl, "output");
    }
    if (!home_max_given) {
        c.synthetic.home_max = std::min<LevelIndex>(c.synthetic.home_max, c.levels().size() - 1);
    }
    c.validate();
    return c;
}

SimConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open config '" + path + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string config_to_json(const SimConfig& c)
{
    json j;
    j["cluster"] = {{"num_pms", c.cluster.num_pms},   {"num_vms", c.cluster.num_vms},
                    {"capacity", c.cluster.capacity}, {"p_idle", c.cluster.p_idle},
                    {"p_max", c.cluster.p_max},       {"p_sleep", c.cluster.p_sleep},
                    {"max_migrations", c.cluster.max_migrations}, {"lambda", c.cluster.lambda}};
    j["levels"] = {{"count", c.level_count}, {"cap_multiple", c.cap_multiple}};
    if (!c.level_values.empty()) {
        j["levels"]["values"] = c.level_values;
    }
    j["window_slots"] = c.window_slots;
    j["slot_minutes"] = c.slot_minutes;
    j["seed"] = c.seed;
    j["controller"] = to_string(c.controller);
    j["madvm"] = {{"tol", c.madvm.vi.tol},
                  {"max_iter", c.madvm.vi.max_iter},
                  {"warm_start", c.madvm.warm_start},
                  {"ranking", ranking_name(c.madvm.ranking)},
                  {"mode", c.madvm.mode == Mode::distributed ? "distributed" : "centralized"}};
    j["predictive_scaler"] = {{"window", c.predictive.window}};
    j["pattern_consolidator"] = {{"period", c.pattern.period}, {"window", c.pattern.window}};
    j["initial_placement"] = c.initial_basis == InitialBasis::profile ? "profile" : "prior";
    if (c.trace_path.empty()) {
        const auto& s = c.synthetic;
        j["trace"]["synthetic"] = {{"num_slots", s.num_slots}, {"regime_slots", s.regime_slots},
                                   {"stickiness", s.stickiness}, {"decay", s.decay},
                                   {"home_min", s.home_min},   {"home_max", s.home_max},
                                   {"jitter", s.jitter}};
    } else {
        j["trace"]["path"] = c.trace_path;
    }
    j["output"] = {{"per_slot_csv", c.output.per_slot_csv},
                   {"report_json", c.output.report_json},
                   {"debug_jsonl", c.output.debug_jsonl}};
    return j.dump(2);
}

SyntheticModel synthetic_model(const SimConfig& config)
{
    const auto& s = config.synthetic;
    const std::size_t vms = config.cluster.num_vms;
    const std::size_t n = config.levels().size();
    detail::Rng rng(config.seed ^ 0x5deece66dULL);
    auto draw_regime = [&](std::vector<LevelIndex>& homes) {
        std::vector<DemandChain> chains;
        chains.reserve(vms);
        homes.resize(vms);
        for (std::size_t l = 0; l < vms; ++l) {
            homes[l] = static_cast<LevelIndex>(rng.integer(s.home_min, s.home_max));
            chains.push_back(sticky_chain(n, homes[l], s.stickiness, s.decay));
        }
        return chains;
    };
    SyntheticModel model;
    model.initial = draw_regime(model.start_levels);
    std::vector<LevelIndex> homes;
    for (std::size_t slot = s.regime_slots; slot < s.num_slots; slot += s.regime_slots) {
        model.schedule.push_back(RegimeSwitch{slot, draw_regime(homes)});
    }
    return model;
}

DemandTrace synthesize(const SimConfig& config)
{
    const DemandLevelSet levels = config.levels();
    const SyntheticModel model = synthetic_model(config);
    DemandTrace trace = synthesize_trace(model.initial, model.schedule, model.start_levels, levels,
                                         config.synthetic.num_slots, config.seed);
    if (config.synthetic.jitter > 0.0) {
        // Pull samples down inside their quantization cell; round-up
        // quantization maps them back to the sampled level.
        detail::Rng rng(config.seed ^ 0x2545f4914f6cdd1dULL);
        for (auto& d : trace.demands) {
            const LevelIndex k = levels.quantize(d);
            if (k > 0) {
                d -= rng.uniform() * config.synthetic.jitter * (levels[k] - levels[k - 1]);
            }
        }
    }
    return trace;
}

DemandTrace make_trace(const SimConfig& config)
{
    if (!config.trace_path.empty()) {
        return load_trace(config.trace_path);
    }
    return synthesize(config);
}

} // namespace madvm
