#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>

#include "panel/common.hpp"
#include "panel/packet.hpp"

namespace panel {

// Original (pre-rewrite) 5-tuple of a session. Field order gives the total
// order used for deterministic table dumps.
struct FlowKey {
    IpAddr src_ip = 0;
    IpAddr dst_ip = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    L4Proto protocol = L4Proto::Tcp;

    auto operator<=>(const FlowKey&) const = default;

    std::array<std::uint8_t, 13> packed() const {
        std::array<std::uint8_t, 13> out;
        store_be32(out.data(), src_ip);
        store_be32(out.data() + 4, dst_ip);
        store_be16(out.data() + 8, src_port);
        store_be16(out.data() + 10, dst_port);
        out[12] = static_cast<std::uint8_t>(protocol);
        return out;
    }

    static FlowKey of_packet(const PacketView& p) {
        return {p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.protocol};
    }
};

// Session identifier: a pool address plus a port, drawn as one uniform bit
// string (pool host bits followed by the port bits).
struct Tag {
    IpAddr pool_ip = 0;
    std::uint16_t port = 0;
    std::uint64_t bits = 0;
};

// Per-session random offsets applied to fingerprintable source fields.
// Drawn once at establishment, uniform over the full field range.
struct NormalizationOffsets {
    std::uint16_t ip_id_offset = 0;
    std::uint32_t seq_offset = 0;
};

enum class SessionState : std::uint8_t { Establishing, Active };

struct SessionEntry {
    FlowKey key;  // original flow, pre-rewrite
    Tag tag;
    // Present only when this landmark is first on the path.
    std::optional<NormalizationOffsets> offsets;
    std::uint8_t ttl_draw = 64;
    SimTime created_at = 0;
    SimTime last_seen = 0;
    SessionState state = SessionState::Establishing;

    // The 5-tuple return traffic carries, used as the reverse-table key.
    FlowKey reverse_key() const {
        return {tag.pool_ip, key.dst_ip, tag.port, key.dst_port, key.protocol};
    }
};

}  // namespace panel
