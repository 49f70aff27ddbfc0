#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>

namespace panel {

// Simulated or capture time, integer nanoseconds.
using SimTime = std::int64_t;

constexpr SimTime seconds(double s) { return static_cast<SimTime>(s * 1e9); }
constexpr SimTime millis(double ms) { return static_cast<SimTime>(ms * 1e6); }
constexpr SimTime micros(double us) { return static_cast<SimTime>(us * 1e3); }

// Error taxonomy. InputError maps to CLI exit code 1, everything else to 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class TruncatedPacket : public InputError {
public:
    using InputError::InputError;
};
class UnsupportedProtocol : public InputError {
public:
    using InputError::InputError;
};
class UnsupportedIpVersion : public InputError {
public:
    using InputError::InputError;
};
class FieldOutOfRange : public Error {
public:
    using Error::Error;
};
class InvalidDistribution : public InputError {
public:
    using InputError::InputError;
};
class MalformedRow : public InputError {
public:
    using InputError::InputError;
};
class EmptyInput : public InputError {
public:
    using InputError::InputError;
};
class NegativeCount : public InputError {
public:
    using InputError::InputError;
};
class UnknownAsn : public InputError {
public:
    using InputError::InputError;
};
class ConfigError : public InputError {
public:
    using InputError::InputError;
};
class InsufficientSamples : public Error {
public:
    using Error::Error;
};

// Big-endian field access (all multi-byte wire fields are big-endian).
inline std::uint16_t load_be16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0]) << 8 | p[1];
}
inline std::uint32_t load_be32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) << 24 | static_cast<std::uint32_t>(p[1]) << 16 |
           static_cast<std::uint32_t>(p[2]) << 8 | p[3];
}
inline void store_be16(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v >> 8);
    p[1] = static_cast<std::uint8_t>(v);
}
inline void store_be32(std::uint8_t* p, std::uint32_t v) {
    p[0] = static_cast<std::uint8_t>(v >> 24);
    p[1] = static_cast<std::uint8_t>(v >> 16);
    p[2] = static_cast<std::uint8_t>(v >> 8);
    p[3] = static_cast<std::uint8_t>(v);
}

// IPv4 addresses kept in host order as plain uint32.
using IpAddr = std::uint32_t;

std::string format_ip(IpAddr a);
IpAddr parse_ip(const std::string& s);

// IPv4 prefix, e.g. 198.51.100.0/24.
struct Cidr {
    IpAddr base = 0;
    int prefix_len = 32;

    static Cidr parse(const std::string& s);
    bool contains(IpAddr a) const {
        if (prefix_len == 0) return true;
        const std::uint32_t mask = prefix_len == 32 ? 0xFFFFFFFFu : ~((1u << (32 - prefix_len)) - 1);
        return (a & mask) == (base & mask);
    }
    int host_bits() const { return 32 - prefix_len; }
    std::string to_string() const;
    bool overlaps(const Cidr& other) const {
        return contains(other.base) || other.contains(base);
    }
};

}  // namespace panel
