#include <gtest/gtest.h>

#include <random>

#include "madvm/demand.hpp"
#include "madvm/errors.hpp"

using namespace madvm;

namespace {

const DemandLevelSet kFive({0.0, 0.25, 0.5, 0.75, 1.0});

// Fills a window with `seq` and returns the estimator.
SlidingWindowEstimator window_of(std::size_t n, std::size_t window, std::initializer_list<LevelIndex> seq)
{
    SlidingWindowEstimator est(n, window);
    for (const auto x : seq) {
        est.push(x);
    }
    return est;
}

} // namespace

TEST(DemandLevelSet, RejectsBadLevelLists)
{
    EXPECT_THROW(DemandLevelSet({0.5}), InputError);
    EXPECT_THROW(DemandLevelSet({0.0, 0.5, 0.5}), InputError);
    EXPECT_THROW(DemandLevelSet({-0.1, 0.5}), InputError);
    EXPECT_NO_THROW(DemandLevelSet({0.0, 0.1}));
}

TEST(DemandLevelSet, UniformSpacing)
{
    const auto lv = DemandLevelSet::uniform(5, 1.0);
    ASSERT_EQ(lv.size(), 5u);
    EXPECT_DOUBLE_EQ(lv[2], 0.5);
    EXPECT_DOUBLE_EQ(DemandLevelSet::uniform(3, 0.25)[2], 0.25);
}

TEST(Quantize, RoundsUpToNextLevel)
{
    EXPECT_EQ(kFive.quantize(0.0), 0u);
    EXPECT_EQ(kFive.quantize(1.0), 4u);
    EXPECT_EQ(kFive.quantize(0.30), 2u);
    EXPECT_EQ(kFive.quantize(0.25), 1u);
    EXPECT_EQ(kFive.quantize(3.0), 4u);
    EXPECT_THROW(kFive.quantize(-0.01), InputError);
}

TEST(Quantize, MonotoneOnRandomPairs)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.3);
    for (int i = 0; i < 2000; ++i) {
        double a = u(rng);
        double b = u(rng);
        if (a > b) {
            std::swap(a, b);
        }
        ASSERT_LE(kFive.quantize(a), kFive.quantize(b)) << a << " " << b;
    }
}

TEST(DemandChain, ValidatesRows)
{
    EXPECT_THROW(DemandChain::from_rows({{0.5, 0.6}, {0.5, 0.5}}), InputError);
    EXPECT_THROW(DemandChain::from_rows({{1.2, -0.2}, {0.5, 0.5}}), InputError);
    const auto c = DemandChain::from_rows({{0.9, 0.1}, {0.5, 0.5}});
    EXPECT_DOUBLE_EQ(c(0, 1), 0.1);
    EXPECT_DOUBLE_EQ(c.lazy()(0, 0), 0.95);
}

TEST(SlidingWindowEstimator, SelfTransitionsOnly)
{
    const auto chain = window_of(3, 10, {0, 0, 0, 0}).estimate();
    EXPECT_DOUBLE_EQ(chain(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(chain(0, 1), 0.0);
}

TEST(SlidingWindowEstimator, AlternatingWindow)
{
    const auto chain = window_of(3, 10, {0, 1, 0, 1, 0}).estimate();
    EXPECT_DOUBLE_EQ(chain(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(chain(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(chain(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(chain(1, 1), 0.0);
}

TEST(SlidingWindowEstimator, UnvisitedRowsAreUniform)
{
    const auto chain = window_of(3, 10, {2, 2}).estimate();
    for (LevelIndex r = 0; r < 2; ++r) {
        for (LevelIndex c = 0; c < 3; ++c) {
            EXPECT_DOUBLE_EQ(chain(r, c), 1.0 / 3.0);
        }
    }
    EXPECT_DOUBLE_EQ(chain(2, 2), 1.0);
}

TEST(SlidingWindowEstimator, EvictsBeyondWindow)
{
    auto est = window_of(2, 3, {0, 0, 0, 1, 1});
    EXPECT_EQ(est.buffer().size(), 3u);
    EXPECT_EQ(est.transition_count(0, 0), 0u);
    EXPECT_EQ(est.transition_count(0, 1), 1u);
    EXPECT_EQ(est.transition_count(1, 1), 1u);
    EXPECT_TRUE(est.counts_consistent());
}

TEST(SlidingWindowEstimator, RejectsOutOfRangeLevel)
{
    SlidingWindowEstimator est(3, 5);
    EXPECT_THROW(est.observe(3), InputError);
    EXPECT_THROW(SlidingWindowEstimator(3, 1), InputError);
}

TEST(SlidingWindowEstimator, RandomUpdatesKeepInvariants)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng() % 6;
        SlidingWindowEstimator est(n, 2 + rng() % 20);
        for (int k = 0; k < 200; ++k) {
            const auto chain = est.observe(rng() % n);
            ASSERT_LE(est.buffer().size(), est.window_slots());
            ASSERT_TRUE(est.counts_consistent());
            ASSERT_TRUE(is_row_stochastic(chain.data(), n));
        }
    }
}

TEST(StationaryDistribution, AbsorbingStart)
{
    const auto r = stationary_distribution(DemandChain::identity(3), {0.0, 1.0, 0.0});
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.distribution, (Distribution{0.0, 1.0, 0.0}));
}

TEST(StationaryDistribution, SymmetricChain)
{
    const auto r = stationary_distribution(DemandChain::from_rows({{0.5, 0.5}, {0.5, 0.5}}), {1.0, 0.0});
    EXPECT_NEAR(r.distribution[0], 0.5, 1e-12);
}

TEST(StationaryDistribution, MatchesBalanceEquation)
{
    // 0.1 * pi0 = 0.5 * pi1 gives pi = (5/6, 1/6).
    const auto r = stationary_distribution(DemandChain::from_rows({{0.9, 0.1}, {0.5, 0.5}}), {0.0, 1.0});
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.distribution[0], 5.0 / 6.0, 1e-8);
    EXPECT_NEAR(r.distribution[1], 1.0 / 6.0, 1e-8);
    EXPECT_LE(r.residual, 1e-9);
}

TEST(StationaryDistribution, PeriodicChainIsFlagged)
{
    const auto r = stationary_distribution(DemandChain::from_rows({{0.0, 1.0}, {1.0, 0.0}}), {1.0, 0.0}, 1e-9, 100);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 100u);
}

TEST(StationaryDistribution, RejectsInvalidStart)
{
    EXPECT_THROW(stationary_distribution(DemandChain::identity(2), {0.7, 0.7}), InputError);
    EXPECT_THROW(stationary_distribution(DemandChain::identity(2), {1.0}), InputError);
}

TEST(FeatureState, RoundsExpectedDemandUp)
{
    const DemandLevelSet three({0.0, 0.25, 0.5});
    EXPECT_EQ(feature_state({1.0, 0.0, 0.0}, three, 4).expected_level, 0u);
    EXPECT_EQ(feature_state({1.0, 0.0, 0.0}, three, 4).location, 4u);
    EXPECT_EQ(feature_state({0.5, 0.5, 0.0}, three, 0).expected_level, 1u);
    EXPECT_EQ(feature_state({0.0, 0.0, 1.0}, three, 0).expected_level, 2u);
}

TEST(SynthesizeTrace, AbsorbingChainIsConstant)
{
    const DemandLevelSet lv = DemandLevelSet::uniform(4);
    const std::vector<LevelIndex> start{2};
    const auto t = synthesize_trace({DemandChain::identity(4)}, {}, start, lv, 10, 1);
    for (std::size_t s = 0; s < 10; ++s) {
        EXPECT_DOUBLE_EQ(t.at(0, s), lv[2]);
    }
}

TEST(SynthesizeTrace, DeterministicAlternation)
{
    const DemandLevelSet lv({0.0, 1.0});
    const auto t = synthesize_trace({DemandChain::from_rows({{0.0, 1.0}, {1.0, 0.0}})}, {}, {}, lv, 4, 99);
    EXPECT_EQ(t.demands, (std::vector<double>{0.0, 1.0, 0.0, 1.0}));
}

TEST(SynthesizeTrace, BitReproducible)
{
    const DemandLevelSet lv = DemandLevelSet::uniform(5);
    std::vector<DemandChain> chains{sticky_chain(5, 1, 0.7, 0.4), sticky_chain(5, 3, 0.5, 0.5)};
    std::vector<RegimeSwitch> sched{{50, {sticky_chain(5, 4, 0.7, 0.4), sticky_chain(5, 0, 0.5, 0.5)}}};
    const auto a = synthesize_trace(chains, sched, {}, lv, 200, 5);
    const auto b = synthesize_trace(chains, sched, {}, lv, 200, 5);
    EXPECT_EQ(a, b);
    const auto c = synthesize_trace(chains, sched, {}, lv, 200, 6);
    EXPECT_NE(a, c);
}

TEST(SynthesizeTrace, RegimeSwitchTakesEffect)
{
    const DemandLevelSet lv({0.0, 0.5, 1.0});
    std::vector<DemandChain> stay0{DemandChain::from_rows({{1, 0, 0}, {1, 0, 0}, {1, 0, 0}})};
    std::vector<RegimeSwitch> sched{{5, {DemandChain::from_rows({{0, 0, 1}, {0, 0, 1}, {0, 0, 1}})}}};
    const auto t = synthesize_trace(stay0, sched, {}, lv, 8, 3);
    EXPECT_DOUBLE_EQ(t.at(0, 4), 0.0);
    EXPECT_DOUBLE_EQ(t.at(0, 5), 1.0);
}

TEST(SynthesizeTrace, RejectsBadInput)
{
    const DemandLevelSet lv = DemandLevelSet::uniform(3);
    EXPECT_THROW(synthesize_trace({}, {}, {}, lv, 5, 1), InputError);
    std::vector<DemandChain> one{DemandChain::identity(3)};
    std::vector<RegimeSwitch> sched{{5, one}, {5, one}};
    EXPECT_THROW(synthesize_trace(one, sched, {}, lv, 10, 1), InputError);
}

TEST(StickyChain, RowsAreStochasticAndSticky)
{
    const auto c = sticky_chain(6, 2, 0.8, 0.3);
    EXPECT_TRUE(is_row_stochastic(c.data(), 6));
    for (LevelIndex j = 0; j < 6; ++j) {
        EXPECT_GE(c(j, j), 0.8);
    }
}
