#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

#include "hlab/vec3.hpp"

namespace hlab {

/// Canonical byte stream of scenario state hashed with 64-bit FNV-1a.
/// Doubles are written as their IEEE-754 bit pattern in little-endian
/// order, so the hash does not depend on struct layout or host endianness.
class StateHasher {
public:
    StateHasher& u8(std::uint8_t v)
    {
        hash_ ^= v;
        hash_ *= kPrime;
        return *this;
    }

    StateHasher& u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
        return *this;
    }

    StateHasher& f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }
    StateHasher& vec(const Vec3& v) { return f64(v.x).f64(v.y).f64(v.z); }
    StateHasher& flag(bool b) { return u8(b ? 1 : 0); }

    StateHasher& text(std::string_view s)
    {
        u64(s.size());
        for (char c : s) {
            u8(static_cast<std::uint8_t>(c));
        }
        return *this;
    }

    [[nodiscard]] std::uint64_t value() const { return hash_; }

private:
    static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ull;
    static constexpr std::uint64_t kPrime = 0x00000100000001b3ull;
    std::uint64_t hash_ = kOffset;
};

/// 16 lowercase hex digits.
std::string hash_to_hex(std::uint64_t h);
/// Inverse of hash_to_hex; throws std::invalid_argument on bad input.
std::uint64_t hash_from_hex(std::string_view text);

} // namespace hlab
