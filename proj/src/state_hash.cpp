#include "hlab/state_hash.hpp"

#include <charconv>
#include <stdexcept>

namespace hlab {

std::string hash_to_hex(std::uint64_t h)
{
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kDigits[h & 0xf];
        h >>= 4;
    }
    return out;
}

std::uint64_t hash_from_hex(std::string_view text)
{
    std::uint64_t value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value, 16);
    if (text.size() != 16 || ec != std::errc{} || ptr != end) {
        throw std::invalid_argument("malformed state hash: " + std::string(text));
    }
    return value;
}

} // namespace hlab
