#include "panel/pcap.hpp"

#include <array>
#include <cstring>

namespace panel {

namespace {

constexpr std::uint32_t kMagic = 0xA1B2C3D4;
constexpr std::uint32_t kMagicSwapped = 0xD4C3B2A1;

std::uint32_t swap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xFF00) | ((v << 8) & 0xFF0000) | (v << 24);
}
std::uint16_t swap16(std::uint16_t v) { return static_cast<std::uint16_t>((v >> 8) | (v << 8)); }

}  // namespace

PcapReader::PcapReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw InputError("cannot open pcap: " + path);
    std::array<std::uint8_t, 24> hdr;
    in_.read(reinterpret_cast<char*>(hdr.data()), hdr.size());
    if (in_.gcount() != static_cast<std::streamsize>(hdr.size()))
        throw InputError("pcap global header truncated: " + path);
    std::uint32_t magic;
    std::memcpy(&magic, hdr.data(), 4);
    if (magic == kMagic)
        swap_ = false;
    else if (magic == kMagicSwapped)
        swap_ = true;
    else
        throw InputError("not a classic pcap file: " + path);
    std::uint16_t ver_major;
    std::memcpy(&ver_major, hdr.data() + 4, 2);
    if (swap_) ver_major = swap16(ver_major);
    if (ver_major != 2) throw InputError("unsupported pcap version: " + path);
    std::memcpy(&snaplen_, hdr.data() + 16, 4);
    std::memcpy(&link_type_, hdr.data() + 20, 4);
    if (swap_) {
        snaplen_ = swap32(snaplen_);
        link_type_ = swap32(link_type_);
    }
    if (link_type_ != linktype::kEthernet && link_type_ != linktype::kRawIp)
        throw InputError("unsupported pcap linktype " + std::to_string(link_type_) + ": " + path);
}

std::optional<PcapRecord> PcapReader::next() {
    std::array<std::uint8_t, 16> rec;
    in_.read(reinterpret_cast<char*>(rec.data()), rec.size());
    if (in_.gcount() == 0) return std::nullopt;
    if (in_.gcount() != static_cast<std::streamsize>(rec.size()))
        throw InputError("pcap record header truncated: " + path_);
    std::uint32_t ts_sec, ts_usec, incl_len, orig_len;
    std::memcpy(&ts_sec, rec.data(), 4);
    std::memcpy(&ts_usec, rec.data() + 4, 4);
    std::memcpy(&incl_len, rec.data() + 8, 4);
    std::memcpy(&orig_len, rec.data() + 12, 4);
    if (swap_) {
        ts_sec = swap32(ts_sec);
        ts_usec = swap32(ts_usec);
        incl_len = swap32(incl_len);
        orig_len = swap32(orig_len);
    }
    if (incl_len > 0x7FFFFFFF || (snaplen_ && incl_len > snaplen_ + 65536))
        throw InputError("pcap record length implausible: " + path_);
    PcapRecord out;
    out.ts = static_cast<SimTime>(ts_sec) * 1'000'000'000 + static_cast<SimTime>(ts_usec) * 1'000;
    out.data.resize(incl_len);
    in_.read(reinterpret_cast<char*>(out.data.data()), incl_len);
    if (in_.gcount() != static_cast<std::streamsize>(incl_len))
        throw InputError("pcap record body truncated: " + path_);
    return out;
}

PcapWriter::PcapWriter(const std::string& path, std::uint32_t link_type)
    : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw InputError("cannot open pcap for writing: " + path);
    std::array<std::uint8_t, 24> hdr{};
    std::uint32_t magic = kMagic;
    std::uint16_t ver_major = 2, ver_minor = 4;
    std::uint32_t snaplen = 262144;
    std::memcpy(hdr.data(), &magic, 4);
    std::memcpy(hdr.data() + 4, &ver_major, 2);
    std::memcpy(hdr.data() + 6, &ver_minor, 2);
    std::memcpy(hdr.data() + 16, &snaplen, 4);
    std::memcpy(hdr.data() + 20, &link_type, 4);
    out_.write(reinterpret_cast<const char*>(hdr.data()), hdr.size());
}

void PcapWriter::write(const PcapRecord& rec) {
    std::array<std::uint8_t, 16> hdr;
    std::uint32_t ts_sec = static_cast<std::uint32_t>(rec.ts / 1'000'000'000);
    std::uint32_t ts_usec = static_cast<std::uint32_t>((rec.ts % 1'000'000'000) / 1'000);
    std::uint32_t len = static_cast<std::uint32_t>(rec.data.size());
    std::memcpy(hdr.data(), &ts_sec, 4);
    std::memcpy(hdr.data() + 4, &ts_usec, 4);
    std::memcpy(hdr.data() + 8, &len, 4);
    std::memcpy(hdr.data() + 12, &len, 4);
    out_.write(reinterpret_cast<const char*>(hdr.data()), hdr.size());
    out_.write(reinterpret_cast<const char*>(rec.data.data()),
               static_cast<std::streamsize>(rec.data.size()));
    if (!out_) throw Error("pcap write failed: " + path_);
}

bool slice_ipv4(std::uint32_t link, std::span<const std::uint8_t> frame, FrameSlice& out) {
    std::size_t off = 0;
    if (link == linktype::kEthernet) {
        if (frame.size() < 14) return false;
        const std::uint16_t ethertype = load_be16(frame.data() + 12);
        if (ethertype != 0x0800) return false;
        off = 14;
    } else if (link != linktype::kRawIp) {
        return false;
    }
    if (frame.size() < off + 20) return false;
    if (frame[off] >> 4 != 4) return false;
    const std::uint16_t total = load_be16(frame.data() + off + 2);
    if (total < 20 || off + total > frame.size()) return false;
    out.ip_offset = off;
    out.ip_length = total;
    return true;
}

}  // namespace panel
