#pragma once

#include <stdexcept>
#include <utility>
#include <variant>

namespace evgw {

template <class E>
struct Unexpected {
    E error;
};

template <class E>
Unexpected(E) -> Unexpected<E>;

/// Value-or-error return type used by the codec and the registry.
template <class T, class E>
class Expected {
public:
    Expected(T value) : data_(std::in_place_index<0>, std::move(value)) {}
    Expected(Unexpected<E> err) : data_(std::in_place_index<1>, std::move(err.error)) {}

    bool has_value() const noexcept { return data_.index() == 0; }
    explicit operator bool() const noexcept { return has_value(); }

    T& value() & {
        check();
        return std::get<0>(data_);
    }
    const T& value() const& {
        check();
        return std::get<0>(data_);
    }
    T&& value() && {
        check();
        return std::get<0>(std::move(data_));
    }

    const E& error() const {
        if (has_value()) throw std::logic_error("Expected holds a value");
        return std::get<1>(data_);
    }

    T* operator->() { return &value(); }
    const T* operator->() const { return &value(); }
    T& operator*() & { return value(); }
    const T& operator*() const& { return value(); }

private:
    void check() const {
        if (!has_value()) throw std::logic_error("Expected holds an error");
    }

    std::variant<T, E> data_;
};

/// Unit payload for operations that only succeed or fail.
struct Ok {
    bool operator==(const Ok&) const = default;
};

}  // namespace evgw
