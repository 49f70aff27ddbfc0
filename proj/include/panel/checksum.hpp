#pragma once

#include <cstdint>
#include <span>

namespace panel {

// One's-complement sum of a byte run, folded to 16 bits. Odd trailing byte
// is padded with zero on the right, per the Internet checksum convention.
std::uint32_t ones_complement_add(std::span<const std::uint8_t> data, std::uint32_t sum = 0);

inline std::uint16_t ones_complement_finish(std::uint32_t sum) {
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum & 0xFFFF);
}

inline std::uint16_t internet_checksum(std::span<const std::uint8_t> data) {
    return ones_complement_finish(ones_complement_add(data));
}

// RFC 1624 eqn. 3: adjust a checksum for one 16-bit word changing from
// old16 to new16. Composes: applying it for every changed word equals a
// full recompute.
std::uint16_t incremental_checksum_update(std::uint16_t old16, std::uint16_t new16,
                                          std::uint16_t checksum);

// Convenience for 32-bit fields (two word updates).
inline std::uint16_t incremental_checksum_update32(std::uint32_t old32, std::uint32_t new32,
                                                   std::uint16_t checksum) {
    checksum = incremental_checksum_update(static_cast<std::uint16_t>(old32 >> 16),
                                           static_cast<std::uint16_t>(new32 >> 16), checksum);
    return incremental_checksum_update(static_cast<std::uint16_t>(old32 & 0xFFFF),
                                       static_cast<std::uint16_t>(new32 & 0xFFFF), checksum);
}

}  // namespace panel
