#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "evgw/model.hpp"

namespace evgw {
namespace {

TEST(Evaluate, ThresholdExamples) {
    EXPECT_TRUE(evaluate(Condition::threshold_of(CompareOp::GT, 50.0), 51.0));
    EXPECT_FALSE(evaluate(Condition::threshold_of(CompareOp::LT, 20.0), 20.0));
    EXPECT_FALSE(evaluate(Condition::flag(), 0.0));
}

TEST(Evaluate, EveryOperatorAtTheBoundary) {
    struct Case {
        CompareOp op;
        bool below, at, above;
    };
    const Case cases[] = {
        {CompareOp::GT, false, false, true}, {CompareOp::GE, false, true, true},
        {CompareOp::LT, true, false, false}, {CompareOp::LE, true, true, false},
        {CompareOp::EQ, false, true, false},
    };
    for (const auto& c : cases) {
        const auto cond = Condition::threshold_of(c.op, 10.0);
        SCOPED_TRACE(std::string(to_string(c.op)));
        EXPECT_EQ(evaluate(cond, 9.5), c.below);
        EXPECT_EQ(evaluate(cond, 10.0), c.at);
        EXPECT_EQ(evaluate(cond, 10.5), c.above);
    }
}

TEST(Evaluate, FlagIsAnyNonzero) {
    EXPECT_TRUE(evaluate(Condition::flag(), 1.0));
    EXPECT_TRUE(evaluate(Condition::flag(), -0.25));
    EXPECT_FALSE(evaluate(Condition::flag(), -0.0));
}

TEST(Phone, Format) {
    EXPECT_TRUE(is_valid_phone("+84900000001"));
    EXPECT_TRUE(is_valid_phone("+12345678"));
    EXPECT_TRUE(is_valid_phone("+123456789012345"));
    EXPECT_FALSE(is_valid_phone("+1234567"));
    EXPECT_FALSE(is_valid_phone("+1234567890123456"));
    EXPECT_FALSE(is_valid_phone("84900000001"));
    EXPECT_FALSE(is_valid_phone("+8490000000a"));
    EXPECT_FALSE(is_valid_phone(""));
}

TEST(Action, WireNamesRoundTrip) {
    const char* names[] = {"SessionInitiation", "ChangePassword", "GetSubscriberList", "DelSubscriber",
                           "AddSubscriber",     "Subscribe",      "Unsubscribe",       "Update"};
    ASSERT_EQ(std::size(kAllActions), std::size(names));
    for (std::size_t i = 0; i < std::size(names); ++i) {
        EXPECT_EQ(to_string(kAllActions[i]), names[i]);
        EXPECT_EQ(action_from_string(names[i]), kAllActions[i]);
    }
    EXPECT_FALSE(action_from_string("Reboot"));
}

TEST(CompareOp, RoundTrip) {
    for (auto op : {CompareOp::GT, CompareOp::GE, CompareOp::LT, CompareOp::LE, CompareOp::EQ}) {
        EXPECT_EQ(compare_op_from_string(to_string(op)), op);
    }
    EXPECT_FALSE(compare_op_from_string("ne"));
}

}  // namespace
}  // namespace evgw
