#include <gtest/gtest.h>

#include "property_suite.hpp"

using namespace madvm::oracle;

TEST(Properties, MigrationCapNeverViolated)
{
    const auto r = check_migration_cap(1000, 101);
    EXPECT_TRUE(r.ok()) << r.failures << " failures, first: " << r.first_failure;
}

TEST(Properties, ChainsStayRowStochastic)
{
    const auto r = check_row_stochastic(1000, 202);
    EXPECT_TRUE(r.ok()) << r.failures << " failures, first: " << r.first_failure;
}

TEST(Properties, SeededRunsAreDeterministic)
{
    const auto r = check_determinism(1000, 303);
    EXPECT_TRUE(r.ok()) << r.failures << " failures, first: " << r.first_failure;
}

TEST(Properties, PowerWithinBounds)
{
    const auto r = check_power_bounds(1000, 404);
    EXPECT_TRUE(r.ok()) << r.failures << " failures, first: " << r.first_failure;
}
