#include "panel/common.hpp"

#include <cstdio>

namespace panel {

std::string format_ip(IpAddr a) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", a >> 24, (a >> 16) & 0xFF, (a >> 8) & 0xFF,
                  a & 0xFF);
    return buf;
}

IpAddr parse_ip(const std::string& s) {
    unsigned b[4];
    char trail;
    if (std::sscanf(s.c_str(), "%u.%u.%u.%u%c", &b[0], &b[1], &b[2], &b[3], &trail) != 4)
        throw ConfigError("bad IPv4 address: " + s);
    for (unsigned v : b)
        if (v > 255) throw ConfigError("bad IPv4 address: " + s);
    return b[0] << 24 | b[1] << 16 | b[2] << 8 | b[3];
}

Cidr Cidr::parse(const std::string& s) {
    auto slash = s.find('/');
    if (slash == std::string::npos) throw ConfigError("CIDR prefix missing '/': " + s);
    Cidr c;
    c.base = parse_ip(s.substr(0, slash));
    int len = 0;
    try {
        len = std::stoi(s.substr(slash + 1));
    } catch (const std::exception&) {
        throw ConfigError("bad CIDR prefix length: " + s);
    }
    if (len < 0 || len > 32) throw ConfigError("bad CIDR prefix length: " + s);
    c.prefix_len = len;
    if (len < 32) c.base &= ~((1u << (32 - len)) - 1);
    return c;
}

std::string Cidr::to_string() const {
    return format_ip(base) + "/" + std::to_string(prefix_len);
}

}  // namespace panel
