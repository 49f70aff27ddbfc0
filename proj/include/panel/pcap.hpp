#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "panel/common.hpp"

namespace panel {

// Classic pcap only (magic 0xa1b2c3d4), either byte order on read,
// little-endian on write. Linktypes: EN10MB (1) and RAW IPv4 (101).
namespace linktype {
constexpr std::uint32_t kEthernet = 1;
constexpr std::uint32_t kRawIp = 101;
}  // namespace linktype

struct PcapRecord {
    SimTime ts = 0;  // nanoseconds
    std::vector<std::uint8_t> data;
};

class PcapReader {
public:
    explicit PcapReader(const std::string& path);

    std::uint32_t link_type() const { return link_type_; }
    // Returns nullopt at end of file. Throws InputError on malformed records.
    std::optional<PcapRecord> next();

private:
    std::ifstream in_;
    std::string path_;
    bool swap_ = false;
    std::uint32_t link_type_ = 0;
    std::uint32_t snaplen_ = 0;
};

class PcapWriter {
public:
    PcapWriter(const std::string& path, std::uint32_t link_type);
    void write(const PcapRecord& rec);
    void flush() { out_.flush(); }

private:
    std::ofstream out_;
    std::string path_;
};

// Splits an EN10MB frame into (ip packet span offset, length) when it holds
// IPv4; returns false for anything else (other ethertypes, VLAN, short
// frames). `ip_len` comes from the IP total-length field so Ethernet
// trailer padding is excluded.
struct FrameSlice {
    std::size_t ip_offset = 0;
    std::size_t ip_length = 0;
};
bool slice_ipv4(std::uint32_t link, std::span<const std::uint8_t> frame, FrameSlice& out);

}  // namespace panel
