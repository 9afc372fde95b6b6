#include "madvm/approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "madvm/errors.hpp"

namespace madvm {

namespace {

double tie_tolerance(double v)
{
    return 1e-9 * std::max(1.0, std::abs(v));
}

} // namespace

SystemState KeyStateSet::joint_state(std::size_t k) const
{
    SystemState s;
    s.levels.resize(context.size());
    s.placement.assignment.resize(context.size());
    for (std::size_t i = 0; i < context.size(); ++i) {
        s.levels[i] = context[i].expected_level;
        s.placement.assignment[i] = context[i].location;
    }
    s.levels[owner_vm] = level_of(k);
    s.placement.assignment[owner_vm] = pm_of(k);
    return s;
}

KeyStateSet build_key_states(std::size_t vm, std::span<const FeatureState> features, const DemandLevelSet& levels,
                             const ClusterSpec& spec)
{
    if (features.size() != spec.num_vms || vm >= spec.num_vms) {
        throw InputError("build_key_states: need one feature state per VM");
    }
    for (const auto& f : features) {
        if (f.expected_level >= levels.size() || f.location >= spec.num_pms) {
            throw InputError("feature state out of range");
        }
    }
    KeyStateSet keys;
    keys.owner_vm = vm;
    keys.num_levels = levels.size();
    keys.num_pms = spec.num_pms;
    keys.context.assign(features.begin(), features.end());
    return keys;
}

PerVmProblem::PerVmProblem(const KeyStateSet& keys, DemandChain chain, const DemandLevelSet& levels,
                           const ClusterSpec& spec)
    : chain_(std::move(chain)), levels_(keys.num_levels), pms_(keys.num_pms), reference_(keys.reference()),
      may_move_(spec.max_migrations > 0)
{
    if (chain_.size() != levels_ || levels.size() != levels_ || spec.num_pms != pms_) {
        throw InputError("per-VM problem dimensions disagree");
    }
    std::vector<double> loads(pms_, 0.0);
    std::vector<std::size_t> counts(pms_, 0);
    for (std::size_t i = 0; i < keys.context.size(); ++i) {
        if (i == keys.owner_vm) {
            continue;
        }
        loads[keys.context[i].location] += levels[keys.context[i].expected_level] / spec.capacity;
        ++counts[keys.context[i].location];
    }
    const IncrementalCost background(std::move(loads), std::move(counts), spec);
    cost_.resize(keys.size());
    for (std::size_t k = 0; k < keys.size(); ++k) {
        cost_[k] = background.with_vm_at(levels[keys.level_of(k)], keys.pm_of(k));
    }
}

double PerVmProblem::expected_next(std::span<const double> v, LevelIndex r, PmId target) const
{
    const auto row = chain_.row(r);
    double sum = 0.0;
    for (std::size_t r2 = 0; r2 < levels_; ++r2) {
        sum += row[r2] * v[r2 * pms_ + target];
    }
    return sum;
}

double PerVmProblem::sweep(std::span<const double> in, std::span<double> out, std::uint64_t* evaluations) const
{
    // The continuation value of a target depends on the level, not on where
    // the VM currently sits, so it is tabulated once per sweep.
    std::vector<double> next(levels_ * pms_);
    for (std::size_t r = 0; r < levels_; ++r) {
        for (std::size_t y = 0; y < pms_; ++y) {
            next[r * pms_ + y] = expected_next(in, r, y);
        }
    }
    std::uint64_t evals = 0;
    for (std::size_t r = 0; r < levels_; ++r) {
        for (std::size_t y = 0; y < pms_; ++y) {
            const std::size_t k = r * pms_ + y;
            double best = std::numeric_limits<double>::infinity();
            if (may_move_) {
                for (std::size_t target = 0; target < pms_; ++target) {
                    best = std::min(best, next[r * pms_ + target]);
                }
                evals += pms_;
            } else {
                best = next[k];
                ++evals;
            }
            out[k] = cost_[k] + best;
        }
    }
    const double at_ref = out[reference_];
    for (auto& x : out) {
        x -= at_ref;
    }
    out[reference_] = 0.0;
    if (evaluations != nullptr) {
        *evaluations += evals;
    }
    return at_ref;
}

PerVMUtility per_vm_value_iteration(const PerVmProblem& problem, std::size_t owner_vm, const PerVmOptions& options,
                                    std::span<const double> initial)
{
    const std::size_t n = problem.size();
    PerVMUtility out;
    out.owner_vm = owner_vm;
    out.num_levels = problem.num_levels();
    out.num_pms = problem.num_pms();
    out.reference = problem.reference();

    std::vector<double> v(n, 0.0);
    if (!initial.empty()) {
        if (initial.size() != n) {
            throw InputError("warm-start table has the wrong size");
        }
        std::copy(initial.begin(), initial.end(), v.begin());
        const double at_ref = v[out.reference];
        for (auto& x : v) {
            x -= at_ref;
        }
    }
    std::vector<double> next(n);
    for (std::size_t t = 1; t <= options.max_iter; ++t) {
        out.beta = problem.sweep(v, next, &out.evaluations);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t k = 0; k < n; ++k) {
            const double d = next[k] - v[k];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        v.swap(next);
        out.iterations = t;
        out.spans.push_back(hi - lo);
        if (options.record_trace) {
            out.trace.push_back(v);
        }
        if (hi - lo <= options.tol) {
            out.converged = true;
            break;
        }
    }
    out.table = std::move(v);
    return out;
}

PerVMUtility per_vm_value_iteration(const KeyStateSet& keys, const DemandChain& chain, const DemandLevelSet& levels,
                                    const ClusterSpec& spec, const PerVmOptions& options)
{
    const PerVmProblem problem(keys, chain, levels, spec);
    return per_vm_value_iteration(problem, keys.owner_vm, options);
}

WeightVector WeightVector::from_tables(std::span<const PerVMUtility> tables)
{
    WeightVector w;
    w.num_vms = tables.size();
    if (tables.empty()) {
        return w;
    }
    w.num_pms = tables.front().num_pms;
    w.block = tables.front().table.size();
    w.values.reserve(w.num_vms * w.block);
    for (std::size_t l = 0; l < tables.size(); ++l) {
        if (tables[l].owner_vm != l || tables[l].table.size() != w.block || tables[l].num_pms != w.num_pms) {
            throw InputError("per-VM tables must be in VM order with equal shapes");
        }
        w.values.insert(w.values.end(), tables[l].table.begin(), tables[l].table.end());
    }
    return w;
}

std::vector<std::size_t> feature_columns(const SystemState& state, const WeightVector& weights)
{
    if (state.levels.size() != weights.num_vms || state.placement.size() != weights.num_vms) {
        throw InputError("state does not match the weight vector");
    }
    std::vector<std::size_t> cols(weights.num_vms);
    for (std::size_t l = 0; l < weights.num_vms; ++l) {
        const std::size_t local = state.levels[l] * weights.num_pms + state.placement[l];
        if (local >= weights.block) {
            throw InputError("state component out of range");
        }
        cols[l] = l * weights.block + local;
    }
    return cols;
}

double approximate_joint_utility(const WeightVector& weights, const SystemState& state)
{
    double sum = 0.0;
    for (const std::size_t c : feature_columns(state, weights)) {
        sum += weights.values[c];
    }
    return sum;
}

ControlBid control_utility(std::size_t vm, const SystemState& current, double current_cost,
                           const PerVMUtility& table, const DemandChain& chain, const ClusterSpec& spec)
{
    const PmId here = current.placement[vm];
    const LevelIndex r = current.levels[vm];
    const auto row = chain.row(r);
    auto value_of = [&](PmId target) {
        double sum = 0.0;
        for (std::size_t r2 = 0; r2 < row.size(); ++r2) {
            sum += row[r2] * table(r2, target);
        }
        return current_cost + sum;
    };

    ControlBid bid;
    bid.vm = vm;
    bid.stay_value = value_of(here);
    bid.control_utility = bid.stay_value;
    bid.best_target = here;
    if (spec.max_migrations == 0) {
        return bid;
    }
    std::vector<double> values(spec.num_pms);
    double best = std::numeric_limits<double>::infinity();
    for (PmId y = 0; y < spec.num_pms; ++y) {
        values[y] = y == here ? bid.stay_value : value_of(y);
        best = std::min(best, values[y]);
    }
    const double cut = best + tie_tolerance(best);
    if (bid.stay_value <= cut) {
        bid.control_utility = best;
        return bid;
    }
    for (PmId y = 0; y < spec.num_pms; ++y) {
        if (values[y] <= cut) {
            bid.best_target = y;
            break;
        }
    }
    bid.control_utility = best;
    bid.gain = bid.stay_value - best;
    return bid;
}

MigrationPlan select_migrations(std::span<const ControlBid> bids, const Placement& current,
                                std::size_t max_migrations, Ranking ranking)
{
    if (bids.size() != current.size()) {
        throw InputError("select_migrations: need one bid per VM");
    }
    std::vector<std::size_t> movers;
    for (std::size_t i = 0; i < bids.size(); ++i) {
        if (bids[i].gain > 0.0 && bids[i].best_target != current[bids[i].vm]) {
            movers.push_back(i);
        }
    }
    auto by_vm = [&](std::size_t a, std::size_t b) { return bids[a].vm < bids[b].vm; };
    switch (ranking) {
    case Ranking::gain_descending:
        std::stable_sort(movers.begin(), movers.end(), [&](std::size_t a, std::size_t b) {
            return bids[a].gain != bids[b].gain ? bids[a].gain > bids[b].gain : by_vm(a, b);
        });
        break;
    case Ranking::utility_ascending:
        std::stable_sort(movers.begin(), movers.end(), [&](std::size_t a, std::size_t b) {
            return bids[a].control_utility != bids[b].control_utility
                       ? bids[a].control_utility < bids[b].control_utility
                       : by_vm(a, b);
        });
        break;
    case Ranking::utility_descending:
        std::stable_sort(movers.begin(), movers.end(), [&](std::size_t a, std::size_t b) {
            return bids[a].control_utility != bids[b].control_utility
                       ? bids[a].control_utility > bids[b].control_utility
                       : by_vm(a, b);
        });
        break;
    }
    MigrationPlan plan = MigrationPlan::stay(current);
    for (std::size_t k = 0; k < movers.size() && k < max_migrations; ++k) {
        plan.targets[bids[movers[k]].vm] = bids[movers[k]].best_target;
    }
    return plan;
}

std::string step_record_to_json(const StepRecord& record)
{
    nlohmann::json j;
    auto& features = j["features"] = nlohmann::json::array();
    for (const auto& f : record.features) {
        features.push_back({{"expected_level", f.expected_level}, {"location", f.location}});
    }
    auto& bids = j["bids"] = nlohmann::json::array();
    for (const auto& b : record.bids) {
        bids.push_back({{"vm", b.vm},
                        {"control_utility", b.control_utility},
                        {"stay_value", b.stay_value},
                        {"best_target", b.best_target},
                        {"gain", b.gain}});
    }
    j["iterations"] = record.iterations;
    j["plan"] = record.plan.targets;
    return j.dump();
}

FeatureState estimate_feature(const DemandChain& chain, LevelIndex level, PmId location,
                              const DemandLevelSet& levels, double tol)
{
    const Distribution start = indicator(chain.size(), level);
    StationaryResult pi = stationary_distribution(chain, start, tol);
    if (!pi.converged) {
        // Periodic chains never settle under power iteration; the lazy chain
        // has the same stationary distribution and is aperiodic.
        pi = stationary_distribution(chain.lazy(), start, tol);
    }
    return feature_state(pi.distribution, levels, location);
}

MigrationPlan madvm_step(const SystemState& current, std::span<SlidingWindowEstimator> estimators,
                         const DemandLevelSet& levels, const ClusterSpec& spec, const MadvmOptions& options,
                         MessageLog* log, StepRecord* record, std::vector<std::vector<double>>* tables)
{
    validate_state(current, levels, spec);
    const std::size_t vms = spec.num_vms;
    if (estimators.size() != vms) {
        throw InputError("madvm_step: need one estimator per VM");
    }

    // Step 2: local chain update and feature state.
    std::vector<DemandChain> chains(vms);
    std::vector<FeatureState> own_features(vms);
    for (std::size_t l = 0; l < vms; ++l) {
        chains[l] = estimators[l].observe(current.levels[l]);
        own_features[l] =
            estimate_feature(chains[l], current.levels[l], current.placement[l], levels, options.stationary_tol);
    }

    // Step 3: share. Distributed peers rebuild the context from broadcasts only.
    std::vector<FeatureState> features;
    SystemState shared;
    if (options.mode == Mode::distributed) {
        MessageLog local;
        MessageLog& out = log != nullptr ? *log : local;
        const std::size_t first = out.messages.size();
        for (std::size_t l = 0; l < vms; ++l) {
            out.messages.push_back(Broadcast{l, own_features[l], current.levels[l], current.placement[l]});
        }
        features.resize(vms);
        shared.levels.resize(vms);
        shared.placement.assignment.resize(vms);
        for (std::size_t m = first; m < out.messages.size(); ++m) {
            const Broadcast& b = out.messages[m];
            features[b.vm] = b.feature;
            shared.levels[b.vm] = b.level;
            shared.placement.assignment[b.vm] = b.location;
        }
    } else {
        features = own_features;
        shared = current;
    }

    // Step 4: per-VM value iteration, cold unless warm start is on.
    const double g = instantaneous_cost(shared, levels, spec);
    std::vector<ControlBid> bids(vms);
    if (record != nullptr) {
        record->iterations.assign(vms, 0);
    }
    if (tables != nullptr && tables->size() != vms) {
        tables->assign(vms, {});
    }
    for (std::size_t l = 0; l < vms; ++l) {
        const KeyStateSet keys = build_key_states(l, features, levels, spec);
        const PerVmProblem problem(keys, chains[l], levels, spec);
        std::span<const double> initial;
        if (options.warm_start && tables != nullptr) {
            initial = (*tables)[l];
        }
        const PerVMUtility util = per_vm_value_iteration(problem, l, options.vi, initial);
        // Step 5: bid.
        bids[l] = control_utility(l, shared, g, util, chains[l], spec);
        if (record != nullptr) {
            record->iterations[l] = util.iterations;
        }
        if (tables != nullptr) {
            (*tables)[l] = util.table;
        }
    }

    MigrationPlan plan = select_migrations(bids, shared.placement, spec.max_migrations, options.ranking);
    if (count_migrations(current.placement, plan) > spec.max_migrations) {
        throw InvariantViolation("auction granted more moves than the cap");
    }
    if (record != nullptr) {
        record->features = std::move(features);
        record->bids = std::move(bids);
        record->plan = plan;
    }
    return plan;
}

MadvmController::MadvmController(const ClusterSpec& spec, const DemandLevelSet& levels, std::size_t window_slots,
                                 MadvmOptions options)
    : spec_(spec), levels_(levels), options_(options)
{
    spec_.validate();
    estimators_.reserve(spec_.num_vms);
    for (std::size_t l = 0; l < spec_.num_vms; ++l) {
        estimators_.emplace_back(levels_.size(), window_slots);
    }
}

MigrationPlan MadvmController::step(const SystemState& current)
{
    return madvm_step(current, estimators_, levels_, spec_, options_, &log_, &record_, &tables_);
}

} // namespace madvm
