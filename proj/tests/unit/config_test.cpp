#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "madvm/config.hpp"
#include "madvm/errors.hpp"

using namespace madvm;

TEST(Config, EmptyObjectGivesDefaults)
{
    const auto c = parse_config("{}");
    EXPECT_EQ(c.cluster.num_pms, 10u);
    EXPECT_EQ(c.cluster.num_vms, 20u);
    EXPECT_EQ(c.cluster.max_migrations, 1u);
    EXPECT_EQ(c.cluster.lambda, 1e6);
    EXPECT_EQ(c.cluster.p_max, 500.0);
    EXPECT_EQ(c.cluster.p_idle, 250.0);
    EXPECT_EQ(c.cluster.p_sleep, 50.0);
    EXPECT_EQ(c.window_slots, 432u);
    EXPECT_EQ(c.slot_minutes, 10.0);
    EXPECT_EQ(c.controller, ControllerKind::madvm);
    EXPECT_EQ(c.initial_basis, InitialBasis::prior);
    EXPECT_EQ(c.levels().size(), 10u);
}

TEST(Config, MigrationCapFollowsVmCountUnlessGiven)
{
    EXPECT_EQ(parse_config(R"({"cluster": {"num_vms": 120}})").cluster.max_migrations, 3u);
    EXPECT_EQ(parse_config(R"({"cluster": {"num_vms": 50}})").cluster.max_migrations, 1u);
    EXPECT_EQ(parse_config(R"({"cluster": {"num_vms": 120, "max_migrations": 0}})").cluster.max_migrations, 0u);
}

TEST(Config, UnknownKeysAreRejectedAtEveryLevel)
{
    EXPECT_THROW(parse_config(R"({"bogus": 1})"), InputError);
    EXPECT_THROW(parse_config(R"({"cluster": {"pms": 3}})"), InputError);
    EXPECT_THROW(parse_config(R"({"madvm": {"tolerance": 1e-3}})"), InputError);
    EXPECT_THROW(parse_config(R"({"trace": {"synthetic": {"slots": 10}}})"), InputError);
}

TEST(Config, BadValuesAreRejected)
{
    EXPECT_THROW(parse_config("not json"), InputError);
    EXPECT_THROW(parse_config(R"({"controller": "round_robin"})"), InputError);
    EXPECT_THROW(parse_config(R"({"cluster": {"num_pms": -1}})"), InputError);
    EXPECT_THROW(parse_config(R"({"cluster": {"lambda": "high"}})"), InputError);
    EXPECT_THROW(parse_config(R"({"madvm": {"mode": "sideways"}})"), InputError);
    EXPECT_THROW(parse_config(R"({"initial_placement": "random"})"), InputError);
    EXPECT_THROW(parse_config(R"({"trace": {"path": "/nonexistent/trace.csv"}})"), InputError);
}

TEST(Config, ExplicitLevelValues)
{
    const auto c = parse_config(R"({"levels": {"values": [0.0, 0.2, 0.7]}})");
    const auto lv = c.levels();
    ASSERT_EQ(lv.size(), 3u);
    EXPECT_EQ(lv[2], 0.7);
    EXPECT_EQ(c.synthetic.home_max, 2u);   // clamped when not given
    EXPECT_THROW(parse_config(R"({"levels": {"count": 3}, "trace": {"synthetic": {"home_max": 3}}})"), InputError);
}

TEST(Config, RoundTripsThroughJson)
{
    const auto c = parse_config(R"({
        "cluster": {"num_pms": 4, "num_vms": 6, "lambda": 10},
        "controller": "pattern_consolidator",
        "madvm": {"mode": "distributed", "ranking": "utility_ascending", "warm_start": true},
        "pattern_consolidator": {"period": 12},
        "initial_placement": "profile",
        "trace": {"synthetic": {"num_slots": 300, "jitter": 0.5}}
    })");
    const auto back = parse_config(config_to_json(c));
    EXPECT_EQ(config_to_json(back), config_to_json(c));
    EXPECT_EQ(back.controller, ControllerKind::pattern_consolidator);
    EXPECT_EQ(back.madvm.mode, Mode::distributed);
    EXPECT_EQ(back.madvm.ranking, Ranking::utility_ascending);
    EXPECT_TRUE(back.madvm.warm_start);
    EXPECT_EQ(back.pattern.period, 12u);
    EXPECT_EQ(back.initial_basis, InitialBasis::profile);
    EXPECT_EQ(back.synthetic.num_slots, 300u);
}

TEST(Config, ControllerNamesRoundTrip)
{
    for (const auto k : {ControllerKind::madvm, ControllerKind::static_first_fit, ControllerKind::predictive_scaler,
                         ControllerKind::pattern_consolidator, ControllerKind::exact_oracle}) {
        EXPECT_EQ(controller_from_string(to_string(k)), k);
    }
}

TEST(Synthesis, SeededAndShaped)
{
    auto c = parse_config(R"({"cluster": {"num_pms": 3, "num_vms": 5}, "trace": {"synthetic": {"num_slots": 250}}})");
    const auto a = synthesize(c);
    EXPECT_EQ(a.num_vms, 5u);
    EXPECT_EQ(a.num_slots, 250u);
    EXPECT_EQ(a, synthesize(c));
    c.seed = 2;
    EXPECT_NE(a, synthesize(c));
    const auto model = synthetic_model(c);
    EXPECT_EQ(model.initial.size(), 5u);
    EXPECT_EQ(model.schedule.size(), 0u);   // 250 slots fit in one regime
}
