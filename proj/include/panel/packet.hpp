#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "panel/common.hpp"

namespace panel {

enum class L4Proto : std::uint8_t { Tcp = 6, Udp = 17 };

namespace tcpflags {
constexpr std::uint8_t kFin = 0x01;
constexpr std::uint8_t kSyn = 0x02;
constexpr std::uint8_t kRst = 0x04;
constexpr std::uint8_t kPsh = 0x08;
constexpr std::uint8_t kAck = 0x10;
constexpr std::uint8_t kUrg = 0x20;
}  // namespace tcpflags

struct SackBlock {
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    bool operator==(const SackBlock&) const = default;
};

// Parsed IPv4 + TCP/UDP packet. Everything the landmark pipeline reads or
// rewrites is a named field; anything it never touches (IP options, non-SACK
// TCP options) is kept as opaque bytes so serialization is bit-exact.
//
// serialize(parse(bytes)) == bytes holds for well-formed input whose
// checksums verify; serialize recomputes both checksums from scratch unless
// told otherwise.
struct PacketView {
    // IPv4
    std::uint8_t tos = 0;
    std::uint16_t ip_id = 0;
    bool flag_reserved = false;
    bool df = false;
    bool mf = false;
    std::uint16_t frag_offset = 0;  // in 8-byte units, 0..8191
    std::uint8_t ttl = 64;
    L4Proto protocol = L4Proto::Tcp;
    std::uint16_t ip_checksum = 0;
    IpAddr src_ip = 0;
    IpAddr dst_ip = 0;
    std::vector<std::uint8_t> ip_options;  // preserved verbatim

    // TCP/UDP (absent in non-first fragments)
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint16_t l4_checksum = 0;

    // TCP only
    std::uint32_t tcp_seq = 0;
    std::uint32_t tcp_ack = 0;
    std::uint8_t tcp_reserved = 0;  // low nibble of the offset byte
    std::uint8_t tcp_flags = 0;
    std::uint16_t tcp_window = 0;
    std::uint16_t tcp_urgent = 0;
    std::vector<std::uint8_t> tcp_options;  // preserved verbatim
    std::vector<SackBlock> sack_blocks;     // parsed out of tcp_options
    std::size_t sack_offset = 0;            // first block's offset inside tcp_options

    std::vector<std::uint8_t> payload;

    // Validity recorded at parse time, never enforced.
    enum class ChecksumState : std::uint8_t { Valid, Invalid, NotCheckable };
    bool ip_checksum_valid = true;
    ChecksumState l4_check = ChecksumState::NotCheckable;

    bool is_tcp() const { return protocol == L4Proto::Tcp; }
    bool is_udp() const { return protocol == L4Proto::Udp; }
    // Non-first fragments carry no transport header and bypass L4 rewriting.
    bool non_first_fragment() const { return frag_offset != 0; }
    bool fragmented() const { return mf || frag_offset != 0; }

    bool syn() const { return tcp_flags & tcpflags::kSyn; }
    bool ack_flag() const { return tcp_flags & tcpflags::kAck; }

    std::size_t header_length() const { return 20 + ip_options.size(); }
    std::size_t total_length() const;
};

// Throws TruncatedPacket / UnsupportedProtocol / UnsupportedIpVersion.
// Trailing bytes past the IP total length (e.g. Ethernet padding) are the
// caller's concern; parse reads exactly total_length bytes.
PacketView parse_packet(std::span<const std::uint8_t> bytes);

struct SerializeOptions {
    // When false, emits the stored checksum fields untouched (used to carry
    // deliberately corrupted packets through the simulator).
    bool recompute_checksums = true;
};

// Throws FieldOutOfRange. Recomputes both checksums by default; a stored
// UDP checksum of 0 means "disabled" and stays 0.
std::vector<std::uint8_t> serialize_packet(const PacketView& p, SerializeOptions opts = {});

// Recompute the checksum fields in place from the current field values
// (same arithmetic serialize uses).
void refresh_checksums(PacketView& p);

}  // namespace panel
