#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include <nlohmann/json.hpp>

#include "madvm/errors.hpp"
#include "madvm/exact_mdp.hpp"
#include "policy_enumeration.hpp"

using namespace madvm;

namespace {

ClusterSpec spec_of(std::size_t pms, std::size_t vms, std::size_t cap = 1, double lambda = 1e6)
{
    ClusterSpec s;
    s.num_pms = pms;
    s.num_vms = vms;
    s.max_migrations = cap;
    s.lambda = lambda;
    return s;
}

DemandChain random_chain(std::size_t n, std::mt19937_64& rng, double floor = 0.02)
{
    std::uniform_real_distribution<double> u(floor, 1.0);
    std::vector<std::vector<double>> rows(n, std::vector<double>(n));
    for (auto& row : rows) {
        double sum = 0.0;
        for (auto& x : row) {
            x = u(rng);
            sum += x;
        }
        for (auto& x : row) {
            x /= sum;
        }
    }
    return DemandChain::from_rows(rows);
}

ValueIterationOptions tight()
{
    ValueIterationOptions o;
    o.tol = 1e-11;
    o.max_iter = 100000;
    return o;
}

} // namespace

TEST(JointStateSpace, PackUnpackIsABijection)
{
    const JointStateSpace space(3, 2, 3);
    ASSERT_EQ(space.size(), 216u);
    for (std::size_t s = 0; s < space.size(); ++s) {
        ASSERT_EQ(space.pack(space.unpack(s)), s);
    }
    // VM 0 is the least significant digit.
    EXPECT_EQ(space.pack(SystemState{{0, 0, 0}, Placement{{1, 0, 0}}}), 1u);
    EXPECT_EQ(space.pack(SystemState{{1, 0, 0}, Placement{{0, 0, 0}}}), 2u);
}

TEST(JointStateSpace, RefusesOversizedInstances)
{
    EXPECT_THROW(JointStateSpace(5, 4, 5), BudgetExceeded);
    EXPECT_NO_THROW(JointStateSpace(2, 10, 10));
    const DemandLevelSet lv = DemandLevelSet::uniform(5);
    std::vector<DemandChain> chains(4, DemandChain::uniform(5));
    EXPECT_THROW(ExactModel(chains, spec_of(5, 4), lv), BudgetExceeded);
}

TEST(FeasiblePlans, PrunedByCapInLexicographicOrder)
{
    const auto s = spec_of(3, 3, 1);
    const auto plans = feasible_plans(Placement{{0, 1, 2}}, s);
    EXPECT_EQ(plans.size(), 1u + 3u * 2u);
    EXPECT_TRUE(std::is_sorted(plans.begin(), plans.end(),
                               [](const auto& a, const auto& b) { return a.targets < b.targets; }));
    EXPECT_NE(std::find(plans.begin(), plans.end(), MigrationPlan{{0, 1, 2}}), plans.end());
    for (const auto& p : plans) {
        EXPECT_LE(count_migrations(Placement{{0, 1, 2}}, p), 1u);
    }
    EXPECT_EQ(feasible_plans(Placement{{0, 1, 2}}, spec_of(3, 3, 0)).size(), 1u);
    EXPECT_EQ(feasible_plans(Placement{{0, 1, 2}}, spec_of(3, 3, 3)).size(), 27u);
}

TEST(JointTransitionProb, DeterministicPlacementAndProductDemand)
{
    const auto s = spec_of(2, 2, 1);
    const std::vector<DemandChain> chains{DemandChain::from_rows({{0.9, 0.1}, {0.5, 0.5}}),
                                          DemandChain::from_rows({{0.5, 0.5}, {0.2, 0.8}})};
    const SystemState from{{0, 0}, Placement{{0, 1}}};
    const MigrationPlan stay{{0, 1}};
    EXPECT_DOUBLE_EQ(joint_transition_prob(from, SystemState{{0, 0}, Placement{{0, 1}}}, stay, chains, s), 0.45);
    EXPECT_DOUBLE_EQ(joint_transition_prob(from, SystemState{{0, 0}, Placement{{1, 1}}}, stay, chains, s), 0.0);
    EXPECT_THROW(joint_transition_prob(from, from, MigrationPlan{{1, 0}}, chains, s), ConstraintError);

    const std::vector<DemandChain> ident(2, DemandChain::identity(2));
    EXPECT_DOUBLE_EQ(joint_transition_prob(from, SystemState{{0, 0}, Placement{{1, 1}}}, MigrationPlan{{1, 1}}, ident, s),
                     1.0);
}

// Every level absorbs with its own gain, so the relative values never settle;
// the gain seen from the reference is still its own cost.
TEST(ValueIteration, MultichainInstanceIsFlagged)
{
    const DemandLevelSet lv = DemandLevelSet::uniform(3);
    const auto s = spec_of(1, 1);
    const ExactModel model({DemandChain::identity(3)}, s, lv);
    ValueIterationOptions o;
    o.reference = 2;
    o.max_iter = 500;
    const auto v = value_iteration(model, o);
    EXPECT_FALSE(v.converged);
    EXPECT_EQ(v.iterations, 500u);
    EXPECT_NEAR(v.beta, instantaneous_cost(SystemState{{2}, Placement{{0}}}, lv, s), 1e-9);
    EXPECT_DOUBLE_EQ(v.values[2], 0.0);
}

TEST(ValueIteration, NoChoiceGivesStationaryExpectation)
{
    const DemandLevelSet lv({0.2, 0.9});
    const auto s = spec_of(1, 1);
    const auto chain = DemandChain::from_rows({{0.9, 0.1}, {0.5, 0.5}});
    const auto v = value_iteration(std::vector<DemandChain>{chain}, s, lv, tight());
    const auto pi = stationary_distribution(chain, {1.0, 0.0}).distribution;
    const double g0 = instantaneous_cost(SystemState{{0}, Placement{{0}}}, lv, s);
    const double g1 = instantaneous_cost(SystemState{{1}, Placement{{0}}}, lv, s);
    EXPECT_NEAR(v.beta, 5.0 / 6.0 * g0 + 1.0 / 6.0 * g1, 1e-6);
    EXPECT_NEAR(v.beta, pi[0] * g0 + pi[1] * g1, 1e-6);
}

TEST(ValueIteration, ReferencePinnedAfterEverySweep)
{
    const DemandLevelSet lv = DemandLevelSet::uniform(2);
    std::mt19937_64 rng(4);
    const ExactModel model({random_chain(2, rng), random_chain(2, rng)}, spec_of(2, 2), lv);
    for (std::size_t k = 1; k <= 12; ++k) {
        ValueIterationOptions o;
        o.max_iter = k;
        o.tol = 0.0;
        o.reference = 5;
        const auto v = value_iteration(model, o);
        ASSERT_EQ(v.iterations, k);
        ASSERT_EQ(v.values[5], 0.0);
    }
}

TEST(ValueIteration, SpanIsNonIncreasing)
{
    const DemandLevelSet lv = DemandLevelSet::uniform(3, 0.6);
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        const ExactModel model({random_chain(3, rng), random_chain(3, rng)}, spec_of(2, 2, 1, 1e3), lv);
        ValueIterationOptions o = tight();
        o.record_spans = true;
        const auto v = value_iteration(model, o);
        ASSERT_TRUE(v.converged);
        for (std::size_t t = 2; t < v.spans.size(); ++t) {
            ASSERT_LE(v.spans[t], v.spans[t - 1] + 1e-12) << "sweep " << t;
        }
    }
}

TEST(ValueIteration, NonConvergenceIsFlagged)
{
    const DemandLevelSet lv({0.0, 0.5});
    const ExactModel model({DemandChain::from_rows({{0.0, 1.0}, {1.0, 0.0}})}, spec_of(1, 1), lv);
    ValueIterationOptions o;
    o.max_iter = 50;
    const auto v = value_iteration(model, o);
    EXPECT_FALSE(v.converged);
    EXPECT_EQ(v.iterations, 50u);
}

TEST(ValueIteration, MatchesPolicyEnumerationOnSmallInstances)
{
    std::mt19937_64 rng(21);
    struct Shape {
        std::size_t pms, vms, levels, cap;
        double top;
    };
    const Shape shapes[] = {{2, 1, 3, 1, 1.0}, {3, 1, 2, 1, 1.0}, {3, 1, 3, 1, 0.9}, {1, 2, 3, 1, 0.7}};
    for (const auto& sh : shapes) {
        for (int trial = 0; trial < 3; ++trial) {
            const DemandLevelSet lv = DemandLevelSet::uniform(sh.levels, sh.top);
            std::vector<DemandChain> chains;
            for (std::size_t l = 0; l < sh.vms; ++l) {
                chains.push_back(random_chain(sh.levels, rng));
            }
            const ExactModel model(chains, spec_of(sh.pms, sh.vms, sh.cap, 1e3), lv);
            const auto v = value_iteration(model, tight());
            ASSERT_TRUE(v.converged);
            const auto best = oracle::enumerate_policies(model);
            EXPECT_NEAR(v.beta, best.best_gain, 1e-6) << sh.pms << "x" << sh.vms << "x" << sh.levels;
        }
    }
}

TEST(ValueIteration, FullSupportEnumeratorAgreesWithGenericOne)
{
    std::mt19937_64 rng(5);
    const DemandLevelSet lv = DemandLevelSet::uniform(2, 0.8);
    for (int trial = 0; trial < 4; ++trial) {
        const ExactModel model({random_chain(2, rng)}, spec_of(3, 1, 1, 1e4), lv);
        const auto a = oracle::enumerate_policies(model);
        const auto b = oracle::enumerate_policies_full_support(model);
        EXPECT_EQ(a.policies, b.policies);
        EXPECT_NEAR(a.best_gain, b.best_gain, 1e-9);
    }
}

TEST(ExtractPolicy, SinglePmIsForcedIdentity)
{
    const DemandLevelSet lv = DemandLevelSet::uniform(3);
    std::mt19937_64 rng(2);
    const ExactModel model({random_chain(3, rng), random_chain(3, rng)}, spec_of(1, 2), lv);
    const auto v = value_iteration(model, tight());
    const auto policy = extract_policy(model, v);
    for (std::size_t s = 0; s < model.num_states(); ++s) {
        EXPECT_EQ(policy.actions[s], MigrationPlan::stay(model.space().unpack(s).placement));
    }
}

TEST(ExtractPolicy, StayAttainsMinimumWhenConsolidated)
{
    const DemandLevelSet lv({0.2, 0.4});
    const auto s = spec_of(2, 2);
    const ExactModel model({DemandChain::identity(2), DemandChain::identity(2)}, s, lv);
    const auto v = value_iteration(model, tight());
    const std::size_t packed = model.space().pack(SystemState{{1, 1}, Placement{{0, 0}}});
    std::size_t stay = model.num_actions(packed);
    double best = 1e300;
    for (std::size_t a = 0; a < model.num_actions(packed); ++a) {
        best = std::min(best, model.q_value(packed, a, v.values));
        if (model.moves(packed, a) == 0) {
            stay = a;
        }
    }
    ASSERT_LT(stay, model.num_actions(packed));
    EXPECT_NEAR(model.q_value(packed, stay, v.values), best, 1e-9);
    EXPECT_EQ(extract_policy(model, v, TieBreak::prefer_stay).actions[packed], (MigrationPlan{{0, 0}}));
}

TEST(ExtractPolicy, PoliciesRespectTheCap)
{
    const DemandLevelSet lv = DemandLevelSet::uniform(2);
    std::mt19937_64 rng(12);
    const ExactModel model({random_chain(2, rng), random_chain(2, rng), random_chain(2, rng)}, spec_of(2, 3, 1), lv);
    const auto v = value_iteration(model, tight());
    for (const auto tb : {TieBreak::lexicographic, TieBreak::prefer_stay}) {
        const auto policy = extract_policy(model, v, tb);
        for (std::size_t s = 0; s < model.num_states(); ++s) {
            ASSERT_LE(count_migrations(model.space().unpack(s).placement, policy.actions[s]), 1u);
        }
    }
}

TEST(ExtractPolicy, PolicyGainEqualsBeta)
{
    std::mt19937_64 rng(31);
    const DemandLevelSet lv = DemandLevelSet::uniform(2, 0.9);
    for (int trial = 0; trial < 5; ++trial) {
        const ExactModel model({random_chain(2, rng), random_chain(2, rng)}, spec_of(2, 2, 1, 1e3), lv);
        const auto v = value_iteration(model, tight());
        for (const auto tb : {TieBreak::lexicographic, TieBreak::prefer_stay}) {
            const auto gain = oracle::evaluate_policy(model, extract_policy(model, v, tb).action_index);
            EXPECT_NEAR(gain.min_gain, v.beta, 1e-6);
            EXPECT_NEAR(gain.max_gain, v.beta, 1e-6);
        }
    }
}

TEST(ExtractPolicy, LongRolloutAverageMatchesBeta)
{
    // Small level gap keeps the per-slot cost variance low enough for a
    // 10^6-slot sample mean to resolve beta to 1e-4 relative.
    const DemandLevelSet lv({0.0, 0.05});
    std::mt19937_64 rng(77);
    const ExactModel model({random_chain(2, rng, 0.2), random_chain(2, rng, 0.2)}, spec_of(2, 2, 1, 1e3), lv);
    const auto v = value_iteration(model, tight());
    const auto policy = extract_policy(model, v);

    std::mt19937_64 sim(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t s = 0;
    double sum = 0.0;
    const std::size_t slots = 1000000;
    for (std::size_t t = 0; t < slots; ++t) {
        sum += model.cost(s);
        const auto succ = model.successors(s, policy.action_index[s]);
        double x = u(sim);
        std::size_t next = succ.back().first;
        for (const auto& [j, p] : succ) {
            if (x < p) {
                next = j;
                break;
            }
            x -= p;
        }
        s = next;
    }
    EXPECT_NEAR(sum / static_cast<double>(slots), v.beta, 1e-4 * v.beta);
}

TEST(OracleJson, ExportsBetaValuesAndPolicy)
{
    const DemandLevelSet lv = DemandLevelSet::uniform(2);
    const ExactModel model({DemandChain::uniform(2)}, spec_of(2, 1), lv);
    const auto v = value_iteration(model);
    const auto j = nlohmann::json::parse(oracle_to_json(model, v, extract_policy(model, v)));
    EXPECT_DOUBLE_EQ(j["beta"].get<double>(), v.beta);
    EXPECT_EQ(j["values"].size(), 4u);
    EXPECT_EQ(j["policy"].size(), 4u);
    EXPECT_EQ(j["policy"][0].size(), 1u);
}
