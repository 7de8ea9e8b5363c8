#include "evgw/model.hpp"

#include <algorithm>
#include <cctype>

namespace evgw {

namespace {

constexpr std::array<std::string_view, 8> kActionNames = {
    "SessionInitiation", "ChangePassword", "GetSubscriberList", "DelSubscriber",
    "AddSubscriber",     "Subscribe",      "Unsubscribe",       "Update",
};

}  // namespace

std::string_view to_string(CompareOp op) {
    switch (op) {
        case CompareOp::GT: return "gt";
        case CompareOp::GE: return "ge";
        case CompareOp::LT: return "lt";
        case CompareOp::LE: return "le";
        case CompareOp::EQ: return "eq";
    }
    return "gt";
}

std::optional<CompareOp> compare_op_from_string(std::string_view text) {
    if (text == "gt") return CompareOp::GT;
    if (text == "ge") return CompareOp::GE;
    if (text == "lt") return CompareOp::LT;
    if (text == "le") return CompareOp::LE;
    if (text == "eq") return CompareOp::EQ;
    return std::nullopt;
}

Condition Condition::threshold_of(CompareOp op, double bound, std::string unit) {
    return Condition{Kind::Threshold, op, bound, std::move(unit)};
}

Condition Condition::flag() { return Condition{}; }

bool evaluate(const Condition& condition, double value) noexcept {
    if (condition.kind == Condition::Kind::BooleanFlag) return value != 0.0;
    const double bound = condition.threshold;
    switch (condition.op) {
        case CompareOp::GT: return value > bound;
        case CompareOp::GE: return value >= bound;
        case CompareOp::LT: return value < bound;
        case CompareOp::LE: return value <= bound;
        case CompareOp::EQ: return value == bound;
    }
    return false;
}

bool is_valid_phone(std::string_view phone) noexcept {
    if (phone.size() < 9 || phone.size() > 16 || phone.front() != '+') return false;
    return std::all_of(phone.begin() + 1, phone.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

std::string_view to_string(Role role) {
    return role == Role::Admin ? "admin" : "subscriber";
}

std::string_view to_string(Action action) {
    return kActionNames[static_cast<std::size_t>(action)];
}

std::optional<Action> action_from_string(std::string_view text) {
    for (std::size_t i = 0; i < kActionNames.size(); ++i) {
        if (kActionNames[i] == text) return static_cast<Action>(i);
    }
    return std::nullopt;
}

}  // namespace evgw
