#include "madvm/exact_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "madvm/errors.hpp"

namespace madvm {

namespace {

std::size_t checked_power(std::size_t base, std::size_t exp, std::size_t budget)
{
    std::size_t out = 1;
    for (std::size_t k = 0; k < exp; ++k) {
        if (out > budget / base) {
            throw BudgetExceeded("joint state space exceeds the oracle budget of " + std::to_string(budget) +
                                 " states");
        }
        out *= base;
    }
    return out;
}

// Values within this band of the minimum count as ties.
double tie_tolerance(double v)
{
    return 1e-9 * std::max(1.0, std::abs(v));
}

} // namespace

JointStateSpace::JointStateSpace(std::size_t num_vms, std::size_t num_pms, std::size_t num_levels,
                                 std::size_t budget)
    : vms_(num_vms), pms_(num_pms), levels_(num_levels)
{
    if (num_vms == 0 || num_pms == 0 || num_levels == 0) {
        throw InputError("joint state space needs at least one VM, PM and level");
    }
    size_ = checked_power(num_pms * num_levels, num_vms, budget);
}

std::size_t JointStateSpace::pack(const SystemState& s) const
{
    if (s.levels.size() != vms_ || s.placement.size() != vms_) {
        throw InputError("state does not match the joint state space");
    }
    std::size_t index = 0;
    for (std::size_t l = vms_; l-- > 0;) {
        if (s.levels[l] >= levels_ || s.placement[l] >= pms_) {
            throw InputError("state component out of range");
        }
        index = index * local_size() + local_index(s.levels[l], s.placement[l]);
    }
    return index;
}

SystemState JointStateSpace::unpack(std::size_t index) const
{
    if (index >= size_) {
        throw InputError("joint state index out of range");
    }
    SystemState s;
    s.levels.resize(vms_);
    s.placement.assignment.resize(vms_);
    for (std::size_t l = 0; l < vms_; ++l) {
        const std::size_t digit = index % local_size();
        index /= local_size();
        s.levels[l] = digit / pms_;
        s.placement.assignment[l] = digit % pms_;
    }
    return s;
}

std::vector<MigrationPlan> feasible_plans(const Placement& current, const ClusterSpec& spec)
{
    validate_placement(current, spec);
    const std::size_t n = current.size();
    std::vector<MigrationPlan> out;
    std::vector<PmId> targets(n, 0);
    // Odometer with VM 0 as the most significant digit gives lexicographic order.
    for (;;) {
        std::size_t moved = 0;
        for (std::size_t l = 0; l < n; ++l) {
            moved += targets[l] != current[l] ? 1 : 0;
        }
        if (moved <= spec.max_migrations) {
            out.push_back(MigrationPlan{targets});
        }
        std::size_t l = n;
        while (l > 0) {
            --l;
            if (++targets[l] < spec.num_pms) {
                break;
            }
            targets[l] = 0;
            if (l == 0) {
                return out;
            }
        }
    }
}

double joint_transition_prob(const SystemState& from, const SystemState& to, const MigrationPlan& plan,
                             std::span<const DemandChain> chains, const ClusterSpec& spec)
{
    const std::size_t moved = count_migrations(from.placement, plan);
    if (moved > spec.max_migrations) {
        throw ConstraintError("plan migrates " + std::to_string(moved) + " VMs, cap is " +
                              std::to_string(spec.max_migrations));
    }
    if (chains.size() != from.levels.size() || to.levels.size() != from.levels.size()) {
        throw InputError("joint_transition_prob: need one chain per VM");
    }
    if (to.placement.assignment != plan.targets) {
        return 0.0;
    }
    double p = 1.0;
    for (std::size_t l = 0; l < chains.size(); ++l) {
        p *= chains[l](from.levels[l], to.levels[l]);
    }
    return p;
}

ExactModel::ExactModel(std::vector<DemandChain> chains, const ClusterSpec& spec, const DemandLevelSet& levels,
                       std::size_t budget)
    : chains_(std::move(chains)), spec_(spec), levels_(levels),
      space_(spec.num_vms, spec.num_pms, levels.size(), budget)
{
    spec_.validate();
    const std::size_t vms = spec_.num_vms;
    const std::size_t lv = levels_.size();
    if (chains_.size() != vms) {
        throw InputError("exact model needs one chain per VM");
    }
    for (const auto& c : chains_) {
        if (c.size() != lv) {
            throw InputError("chain size does not match level count");
        }
    }

    num_demand_vectors_ = checked_power(lv, vms, budget);
    num_placements_ = checked_power(spec_.num_pms, vms, budget);

    // Demand vector q and placement y use VM 0 as the least significant digit.
    auto decode = [vms](std::size_t code, std::size_t base) {
        std::vector<std::size_t> digits(vms);
        for (std::size_t l = 0; l < vms; ++l) {
            digits[l] = code % base;
            code /= base;
        }
        return digits;
    };
    auto encode = [vms](const std::vector<std::size_t>& digits, std::size_t base) {
        std::size_t code = 0;
        for (std::size_t l = vms; l-- > 0;) {
            code = code * base + digits[l];
        }
        return code;
    };

    placements_.resize(num_placements_);
    for (std::size_t y = 0; y < num_placements_; ++y) {
        placements_[y] = decode(y, spec_.num_pms);
    }

    demand_successors_.resize(num_demand_vectors_);
    for (std::size_t q = 0; q < num_demand_vectors_; ++q) {
        const auto from = decode(q, lv);
        for (std::size_t q2 = 0; q2 < num_demand_vectors_; ++q2) {
            const auto to = decode(q2, lv);
            double p = 1.0;
            for (std::size_t l = 0; l < vms && p > 0.0; ++l) {
                p *= chains_[l](from[l], to[l]);
            }
            if (p > 0.0) {
                demand_successors_[q].emplace_back(q2, p);
            }
        }
    }

    actions_.resize(num_placements_);
    for (std::size_t y = 0; y < num_placements_; ++y) {
        for (const auto& plan : feasible_plans(Placement{placements_[y]}, spec_)) {
            actions_[y].push_back(encode(plan.targets, spec_.num_pms));
        }
    }

    const std::size_t n = space_.size();
    q_of_.resize(n);
    y_of_.resize(n);
    index_.resize(n);
    cost_.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        const SystemState st = space_.unpack(s);
        const std::size_t q = encode(st.levels, lv);
        const std::size_t y = encode(st.placement.assignment, spec_.num_pms);
        q_of_[s] = q;
        y_of_[s] = y;
        index_[q * num_placements_ + y] = s;
        cost_[s] = instantaneous_cost(st, levels_, spec_);
    }
}

MigrationPlan ExactModel::action(std::size_t s, std::size_t a) const
{
    return MigrationPlan{placements_[actions_[y_of_[s]][a]]};
}

std::size_t ExactModel::moves(std::size_t s, std::size_t a) const
{
    const auto& from = placements_[y_of_[s]];
    const auto& to = placements_[actions_[y_of_[s]][a]];
    std::size_t moved = 0;
    for (std::size_t l = 0; l < from.size(); ++l) {
        moved += from[l] != to[l] ? 1 : 0;
    }
    return moved;
}

double ExactModel::q_value(std::size_t s, std::size_t a, std::span<const double> v) const
{
    const std::size_t y2 = actions_[y_of_[s]][a];
    double expected = 0.0;
    for (const auto& [q2, p] : demand_successors_[q_of_[s]]) {
        expected += p * v[index_[q2 * num_placements_ + y2]];
    }
    return cost_[s] + expected;
}

std::vector<std::pair<std::size_t, double>> ExactModel::successors(std::size_t s, std::size_t a) const
{
    const std::size_t y2 = actions_[y_of_[s]][a];
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& [q2, p] : demand_successors_[q_of_[s]]) {
        out.emplace_back(index_[q2 * num_placements_ + y2], p);
    }
    return out;
}

UtilityVector value_iteration(const ExactModel& model, const ValueIterationOptions& options)
{
    const std::size_t n = model.num_states();
    const std::size_t ref = options.reference.value_or(0);
    if (ref >= n) {
        throw InputError("reference state out of range");
    }

    UtilityVector out;
    out.reference_state = ref;
    std::vector<double> v(n, 0.0);
    std::vector<double> next(n);
    for (std::size_t t = 1; t <= options.max_iter; ++t) {
        for (std::size_t s = 0; s < n; ++s) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < model.num_actions(s); ++a) {
                best = std::min(best, model.q_value(s, a, v));
            }
            next[s] = best;
        }
        const double at_ref = next[ref];
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t s = 0; s < n; ++s) {
            next[s] -= at_ref;
            const double d = next[s] - v[s];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        next[ref] = 0.0;
        const double span = hi - lo;
        v.swap(next);
        out.beta = at_ref;
        out.iterations = t;
        if (options.record_spans) {
            out.spans.push_back(span);
        }
        if (span <= options.tol) {
            out.converged = true;
            break;
        }
    }
    out.values = std::move(v);
    return out;
}

UtilityVector value_iteration(std::span<const DemandChain> chains, const ClusterSpec& spec,
                              const DemandLevelSet& levels, const ValueIterationOptions& options)
{
    const ExactModel model(std::vector<DemandChain>(chains.begin(), chains.end()), spec, levels);
    return value_iteration(model, options);
}

Policy extract_policy(const ExactModel& model, const UtilityVector& utility, TieBreak tie_break)
{
    const std::size_t n = model.num_states();
    if (utility.values.size() != n) {
        throw InputError("utility vector does not match the model");
    }
    Policy policy;
    policy.actions.reserve(n);
    policy.action_index.reserve(n);
    std::vector<double> q;
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t na = model.num_actions(s);
        q.resize(na);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < na; ++a) {
            q[a] = model.q_value(s, a, utility.values);
            best = std::min(best, q[a]);
        }
        const double cut = best + tie_tolerance(best);
        std::size_t chosen = na;
        for (std::size_t a = 0; a < na; ++a) {
            if (q[a] > cut) {
                continue;
            }
            // Actions are already in lexicographic order, so the first
            // minimiser wins unless fewer moves are preferred.
            if (chosen == na ||
                (tie_break == TieBreak::prefer_stay && model.moves(s, a) < model.moves(s, chosen))) {
                chosen = a;
            }
        }
        policy.action_index.push_back(chosen);
        policy.actions.push_back(model.action(s, chosen));
    }
    return policy;
}

std::string oracle_to_json(const ExactModel& model, const UtilityVector& utility, const Policy& policy)
{
    nlohmann::json j;
    j["beta"] = utility.beta;
    j["reference_state"] = utility.reference_state;
    j["iterations"] = utility.iterations;
    j["converged"] = utility.converged;
    j["values"] = utility.values;
    auto& states = j["states"] = nlohmann::json::array();
    for (std::size_t s = 0; s < model.num_states(); ++s) {
        const auto st = model.space().unpack(s);
        states.push_back({{"levels", st.levels}, {"placement", st.placement.assignment}});
    }
    auto& pol = j["policy"] = nlohmann::json::array();
    for (const auto& plan : policy.actions) {
        pol.push_back(plan.targets);
    }
    return j.dump(2);
}

} // namespace madvm
