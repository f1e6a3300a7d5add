#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

namespace raresim::detail {

class Fnv1a {
public:
    void add_bytes(const void* data, std::size_t size) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }

    template <class T>
        requires std::is_arithmetic_v<T>
    void add(T value) {
        // Normalize negative zero so equal values hash equally.
        if constexpr (std::is_floating_point_v<T>) {
            if (value == T{0}) value = T{0};
        }
        add_bytes(&value, sizeof value);
    }

    void add(std::string_view s) {
        add(static_cast<std::uint64_t>(s.size()));
        add_bytes(s.data(), s.size());
    }

    std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return out;
}

} // namespace raresim::detail
