#include "panel/packet.hpp"

#include <cstring>

#include "panel/checksum.hpp"

namespace panel {

namespace {

constexpr std::size_t kIpMinHeader = 20;
constexpr std::size_t kTcpMinHeader = 20;
constexpr std::size_t kUdpHeader = 8;

std::uint32_t pseudo_header_sum(const PacketView& p, std::size_t l4_length) {
    std::uint8_t ph[12];
    store_be32(ph, p.src_ip);
    store_be32(ph + 4, p.dst_ip);
    ph[8] = 0;
    ph[9] = static_cast<std::uint8_t>(p.protocol);
    store_be16(ph + 10, static_cast<std::uint16_t>(l4_length));
    return ones_complement_add(ph);
}

// Locates the SACK option (kind 5) in a TCP options run. Returns the offset
// of the first block or npos. Malformed option lists stop the walk; the raw
// bytes are preserved either way.
std::size_t find_sack(std::span<const std::uint8_t> opts, unsigned& block_count) {
    std::size_t i = 0;
    while (i < opts.size()) {
        std::uint8_t kind = opts[i];
        if (kind == 0) break;  // EOL
        if (kind == 1) {       // NOP
            ++i;
            continue;
        }
        if (i + 1 >= opts.size()) break;
        std::uint8_t len = opts[i + 1];
        if (len < 2 || i + len > opts.size()) break;
        if (kind == 5) {
            unsigned body = len - 2u;
            if (body % 8 == 0 && body >= 8 && body <= 32) {
                block_count = body / 8;
                return i + 2;
            }
            break;
        }
        i += len;
    }
    block_count = 0;
    return static_cast<std::size_t>(-1);
}

}  // namespace

std::size_t PacketView::total_length() const {
    std::size_t len = header_length() + payload.size();
    if (!non_first_fragment()) {
        if (is_tcp())
            len += kTcpMinHeader + tcp_options.size();
        else
            len += kUdpHeader;
    }
    return len;
}

PacketView parse_packet(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kIpMinHeader) throw TruncatedPacket("buffer below minimal IPv4 header");
    const std::uint8_t* b = bytes.data();

    const unsigned version = b[0] >> 4;
    if (version != 4) throw UnsupportedIpVersion("IP version " + std::to_string(version));
    const unsigned ihl = b[0] & 0x0F;
    if (ihl < 5) throw TruncatedPacket("IHL below 5");
    const std::size_t header_len = ihl * 4u;
    if (bytes.size() < header_len) throw TruncatedPacket("buffer shorter than IHL");

    const std::uint16_t total_length = load_be16(b + 2);
    if (total_length < header_len) throw TruncatedPacket("total length below header length");
    if (bytes.size() < total_length) throw TruncatedPacket("buffer shorter than total length");

    PacketView p;
    p.tos = b[1];
    p.ip_id = load_be16(b + 4);
    const std::uint16_t flags_frag = load_be16(b + 6);
    p.flag_reserved = flags_frag & 0x8000;
    p.df = flags_frag & 0x4000;
    p.mf = flags_frag & 0x2000;
    p.frag_offset = flags_frag & 0x1FFF;
    p.ttl = b[8];
    const std::uint8_t proto = b[9];
    if (proto != static_cast<std::uint8_t>(L4Proto::Tcp) &&
        proto != static_cast<std::uint8_t>(L4Proto::Udp))
        throw UnsupportedProtocol("IP protocol " + std::to_string(proto));
    p.protocol = static_cast<L4Proto>(proto);
    p.ip_checksum = load_be16(b + 10);
    p.src_ip = load_be32(b + 12);
    p.dst_ip = load_be32(b + 16);
    p.ip_options.assign(b + kIpMinHeader, b + header_len);

    p.ip_checksum_valid =
        ones_complement_add({b, header_len}) == 0xFFFF;

    const std::uint8_t* l4 = b + header_len;
    const std::size_t l4_len = total_length - header_len;

    if (p.non_first_fragment()) {
        // No transport header in non-first fragments; keep the payload raw.
        p.payload.assign(l4, l4 + l4_len);
        p.l4_check = PacketView::ChecksumState::NotCheckable;
        return p;
    }

    if (p.protocol == L4Proto::Tcp) {
        if (l4_len < kTcpMinHeader) throw TruncatedPacket("TCP header truncated");
        p.src_port = load_be16(l4);
        p.dst_port = load_be16(l4 + 2);
        p.tcp_seq = load_be32(l4 + 4);
        p.tcp_ack = load_be32(l4 + 8);
        const unsigned data_offset = l4[12] >> 4;
        p.tcp_reserved = l4[12] & 0x0F;
        p.tcp_flags = l4[13];
        p.tcp_window = load_be16(l4 + 14);
        p.l4_checksum = load_be16(l4 + 16);
        p.tcp_urgent = load_be16(l4 + 18);
        if (data_offset < 5) throw TruncatedPacket("TCP data offset below 5");
        const std::size_t tcp_header = data_offset * 4u;
        if (l4_len < tcp_header) throw TruncatedPacket("TCP options truncated");
        p.tcp_options.assign(l4 + kTcpMinHeader, l4 + tcp_header);
        unsigned blocks = 0;
        std::size_t off = find_sack(p.tcp_options, blocks);
        if (off != static_cast<std::size_t>(-1)) {
            p.sack_offset = off;
            for (unsigned i = 0; i < blocks; ++i) {
                SackBlock sb;
                sb.left = load_be32(p.tcp_options.data() + off + 8 * i);
                sb.right = load_be32(p.tcp_options.data() + off + 8 * i + 4);
                p.sack_blocks.push_back(sb);
            }
        }
        p.payload.assign(l4 + tcp_header, l4 + l4_len);
    } else {
        if (l4_len < kUdpHeader) throw TruncatedPacket("UDP header truncated");
        p.src_port = load_be16(l4);
        p.dst_port = load_be16(l4 + 2);
        const std::uint16_t udp_length = load_be16(l4 + 4);
        p.l4_checksum = load_be16(l4 + 6);
        if (udp_length != l4_len) throw TruncatedPacket("UDP length disagrees with IP payload");
        p.payload.assign(l4 + kUdpHeader, l4 + l4_len);
    }

    if (p.mf) {
        p.l4_check = PacketView::ChecksumState::NotCheckable;  // segment spans fragments
    } else if (p.is_udp() && p.l4_checksum == 0) {
        p.l4_check = PacketView::ChecksumState::NotCheckable;  // checksum disabled
    } else {
        std::uint32_t sum = pseudo_header_sum(p, l4_len);
        sum = ones_complement_add({l4, l4_len}, sum);
        p.l4_check = sum == 0xFFFF ? PacketView::ChecksumState::Valid
                                   : PacketView::ChecksumState::Invalid;
    }
    return p;
}

std::vector<std::uint8_t> serialize_packet(const PacketView& p, SerializeOptions opts) {
    if (p.ip_options.size() > 40 || p.ip_options.size() % 4 != 0)
        throw FieldOutOfRange("IP options must be 0..40 bytes, multiple of 4");
    if (p.frag_offset > 0x1FFF) throw FieldOutOfRange("fragment offset above 13 bits");
    const std::size_t total = p.total_length();
    if (total > 65535) throw FieldOutOfRange("packet exceeds 65535 bytes");

    const bool has_l4 = !p.non_first_fragment();
    if (has_l4 && p.is_tcp()) {
        if (p.tcp_options.size() > 40 || p.tcp_options.size() % 4 != 0)
            throw FieldOutOfRange("TCP options must be 0..40 bytes, multiple of 4");
        if (!p.sack_blocks.empty() &&
            p.sack_offset + 8 * p.sack_blocks.size() > p.tcp_options.size())
            throw FieldOutOfRange("SACK blocks exceed recorded option region");
        if (p.tcp_reserved > 0x0F) throw FieldOutOfRange("TCP reserved nibble");
    }

    std::vector<std::uint8_t> out(total);
    std::uint8_t* b = out.data();
    const std::size_t header_len = p.header_length();

    b[0] = static_cast<std::uint8_t>(0x40 | (header_len / 4));
    b[1] = p.tos;
    store_be16(b + 2, static_cast<std::uint16_t>(total));
    store_be16(b + 4, p.ip_id);
    std::uint16_t flags_frag = p.frag_offset;
    if (p.flag_reserved) flags_frag |= 0x8000;
    if (p.df) flags_frag |= 0x4000;
    if (p.mf) flags_frag |= 0x2000;
    store_be16(b + 6, flags_frag);
    b[8] = p.ttl;
    b[9] = static_cast<std::uint8_t>(p.protocol);
    store_be16(b + 10, opts.recompute_checksums ? 0 : p.ip_checksum);
    store_be32(b + 12, p.src_ip);
    store_be32(b + 16, p.dst_ip);
    if (!p.ip_options.empty())
        std::memcpy(b + kIpMinHeader, p.ip_options.data(), p.ip_options.size());
    if (opts.recompute_checksums)
        store_be16(b + 10, internet_checksum({b, header_len}));

    std::uint8_t* l4 = b + header_len;
    const std::size_t l4_len = total - header_len;

    if (!has_l4) {
        if (!p.payload.empty()) std::memcpy(l4, p.payload.data(), p.payload.size());
        return out;
    }

    if (p.is_tcp()) {
        const std::size_t tcp_header = kTcpMinHeader + p.tcp_options.size();
        store_be16(l4, p.src_port);
        store_be16(l4 + 2, p.dst_port);
        store_be32(l4 + 4, p.tcp_seq);
        store_be32(l4 + 8, p.tcp_ack);
        l4[12] = static_cast<std::uint8_t>((tcp_header / 4) << 4 | p.tcp_reserved);
        l4[13] = p.tcp_flags;
        store_be16(l4 + 14, p.tcp_window);
        store_be16(l4 + 16, opts.recompute_checksums ? 0 : p.l4_checksum);
        store_be16(l4 + 18, p.tcp_urgent);
        if (!p.tcp_options.empty())
            std::memcpy(l4 + kTcpMinHeader, p.tcp_options.data(), p.tcp_options.size());
        for (std::size_t i = 0; i < p.sack_blocks.size(); ++i) {
            store_be32(l4 + kTcpMinHeader + p.sack_offset + 8 * i, p.sack_blocks[i].left);
            store_be32(l4 + kTcpMinHeader + p.sack_offset + 8 * i + 4, p.sack_blocks[i].right);
        }
        if (!p.payload.empty())
            std::memcpy(l4 + tcp_header, p.payload.data(), p.payload.size());
        if (opts.recompute_checksums) {
            std::uint32_t sum = pseudo_header_sum(p, l4_len);
            sum = ones_complement_add({l4, l4_len}, sum);
            std::uint16_t csum = static_cast<std::uint16_t>(~sum & 0xFFFF);
            if (csum == 0) csum = 0xFFFF;
            store_be16(l4 + 16, csum);
        }
    } else {
        store_be16(l4, p.src_port);
        store_be16(l4 + 2, p.dst_port);
        store_be16(l4 + 4, static_cast<std::uint16_t>(l4_len));
        store_be16(l4 + 6, opts.recompute_checksums ? 0 : p.l4_checksum);
        if (!p.payload.empty())
            std::memcpy(l4 + kUdpHeader, p.payload.data(), p.payload.size());
        // A stored checksum of 0 means the sender disabled it; keep it off.
        if (opts.recompute_checksums && p.l4_checksum != 0) {
            std::uint32_t sum = pseudo_header_sum(p, l4_len);
            sum = ones_complement_add({l4, l4_len}, sum);
            std::uint16_t csum = static_cast<std::uint16_t>(~sum & 0xFFFF);
            if (csum == 0) csum = 0xFFFF;
            store_be16(l4 + 6, csum);
        }
    }
    return out;
}

void refresh_checksums(PacketView& p) {
    auto bytes = serialize_packet(p);
    p.ip_checksum = load_be16(bytes.data() + 10);
    p.ip_checksum_valid = true;
    if (!p.non_first_fragment()) {
        const std::size_t header_len = p.header_length();
        const std::size_t csum_off = p.is_tcp() ? 16 : 6;
        p.l4_checksum = load_be16(bytes.data() + header_len + csum_off);
    }
}

}  // namespace panel
