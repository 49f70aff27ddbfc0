#include "panel/checksum.hpp"

namespace panel {

std::uint32_t ones_complement_add(std::span<const std::uint8_t> data, std::uint32_t sum) {
    const std::uint8_t* p = data.data();
    std::size_t n = data.size();
    while (n >= 2) {
        sum += static_cast<std::uint32_t>(p[0]) << 8 | p[1];
        p += 2;
        n -= 2;
    }
    if (n) sum += static_cast<std::uint32_t>(p[0]) << 8;
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return sum;
}

std::uint16_t incremental_checksum_update(std::uint16_t old16, std::uint16_t new16,
                                          std::uint16_t checksum) {
    // HC' = ~(~HC + ~m + m'), all additions one's-complement.
    std::uint32_t sum = static_cast<std::uint32_t>(~checksum & 0xFFFF);
    sum += static_cast<std::uint32_t>(~old16 & 0xFFFF);
    sum += new16;
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum & 0xFFFF);
}

}  // namespace panel
