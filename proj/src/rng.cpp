#include "panel/rng.hpp"

#include <bit>
#include <cstring>
#include <random>
#include <stdexcept>

#include "panel/common.hpp"

namespace panel {

namespace {

inline std::uint32_t rotl32(std::uint32_t v, int n) { return (v << n) | (v >> (32 - n)); }

inline void quarter_round(std::uint32_t& a, std::uint32_t& b, std::uint32_t& c, std::uint32_t& d) {
    a += b; d ^= a; d = rotl32(d, 16);
    c += d; b ^= c; b = rotl32(b, 12);
    a += b; d ^= a; d = rotl32(d, 8);
    c += d; b ^= c; b = rotl32(b, 7);
}

inline std::uint32_t load_le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

inline void store_le32(std::uint8_t* p, std::uint32_t v) {
    p[0] = static_cast<std::uint8_t>(v);
    p[1] = static_cast<std::uint8_t>(v >> 8);
    p[2] = static_cast<std::uint8_t>(v >> 16);
    p[3] = static_cast<std::uint8_t>(v >> 24);
}

}  // namespace

std::array<std::uint8_t, 64> ChaChaRng::block(const std::array<std::uint8_t, 32>& key,
                                              std::uint32_t counter,
                                              const std::array<std::uint8_t, 12>& nonce) {
    std::uint32_t state[16];
    state[0] = 0x61707865;
    state[1] = 0x3320646e;
    state[2] = 0x79622d32;
    state[3] = 0x6b206574;
    for (int i = 0; i < 8; ++i) state[4 + i] = load_le32(key.data() + 4 * i);
    state[12] = counter;
    for (int i = 0; i < 3; ++i) state[13 + i] = load_le32(nonce.data() + 4 * i);

    std::uint32_t x[16];
    std::memcpy(x, state, sizeof x);
    for (int round = 0; round < 10; ++round) {
        quarter_round(x[0], x[4], x[8], x[12]);
        quarter_round(x[1], x[5], x[9], x[13]);
        quarter_round(x[2], x[6], x[10], x[14]);
        quarter_round(x[3], x[7], x[11], x[15]);
        quarter_round(x[0], x[5], x[10], x[15]);
        quarter_round(x[1], x[6], x[11], x[12]);
        quarter_round(x[2], x[7], x[8], x[13]);
        quarter_round(x[3], x[4], x[9], x[14]);
    }
    std::array<std::uint8_t, 64> out;
    for (int i = 0; i < 16; ++i) store_le32(out.data() + 4 * i, x[i] + state[i]);
    return out;
}

ChaChaRng::ChaChaRng(const std::array<std::uint8_t, 32>& key, std::uint64_t stream) : key_(key) {
    store_le32(nonce_.data(), 0);
    store_le32(nonce_.data() + 4, static_cast<std::uint32_t>(stream));
    store_le32(nonce_.data() + 8, static_cast<std::uint32_t>(stream >> 32));
}

ChaChaRng ChaChaRng::from_seed(std::uint64_t seed, std::uint64_t stream) {
    return ChaChaRng(seed_key_from_u64(seed), stream);
}

ChaChaRng ChaChaRng::from_entropy(std::uint64_t stream) {
    std::random_device rd;
    std::array<std::uint8_t, 32> key;
    for (std::size_t i = 0; i < key.size(); i += 4) {
        std::uint32_t v = rd();
        std::memcpy(key.data() + i, &v, 4);
    }
    return ChaChaRng(key, stream);
}

void ChaChaRng::refill() {
    auto blk = block(key_, counter_++, nonce_);
    if (counter_ == 0) throw Error("ChaCha20 stream exhausted");
    std::memcpy(buf_.data(), blk.data(), 64);
    pos_ = 0;
}

ChaChaRng::result_type ChaChaRng::operator()() {
    if (pos_ >= 8) refill();
    return buf_[pos_++];
}

std::uint64_t ChaChaRng::uniform_below(std::uint64_t n) {
    if (n == 0) throw Error("uniform_below(0)");
    if ((n & (n - 1)) == 0) return (*this)() & (n - 1);
    std::uint64_t mask = n - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    for (;;) {
        std::uint64_t v = (*this)() & mask;
        if (v < n) return v;
    }
}

double ChaChaRng::uniform01() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

void ChaChaRng::fill_bytes(std::span<std::uint8_t> out) {
    std::size_t i = 0;
    while (i < out.size()) {
        std::uint64_t w = (*this)();
        std::size_t n = std::min<std::size_t>(8, out.size() - i);
        std::memcpy(out.data() + i, &w, n);
        i += n;
    }
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::array<std::uint8_t, 32> seed_key_from_u64(std::uint64_t seed) {
    std::array<std::uint8_t, 32> key;
    std::uint64_t state = seed;
    for (int i = 0; i < 4; ++i) {
        std::uint64_t w = splitmix64(state);
        std::memcpy(key.data() + 8 * i, &w, 8);
    }
    return key;
}

std::array<std::uint8_t, 32> parse_seed_key(const std::string& text) {
    auto is_hex = [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
    };
    if (text.size() == 64) {
        bool all_hex = true;
        for (char c : text)
            if (!is_hex(c)) all_hex = false;
        if (all_hex) {
            std::array<std::uint8_t, 32> key;
            for (int i = 0; i < 32; ++i)
                key[i] = static_cast<std::uint8_t>(std::stoul(text.substr(2 * i, 2), nullptr, 16));
            return key;
        }
    }
    try {
        std::size_t used = 0;
        std::uint64_t v = std::stoull(text, &used, 0);
        if (used == text.size()) return seed_key_from_u64(v);
    } catch (const std::exception&) {
    }
    throw ConfigError("seed must be a 64-bit integer or 64 hex digits: " + text);
}

std::uint64_t siphash24(std::uint64_t k0, std::uint64_t k1, std::span<const std::uint8_t> data) {
    std::uint64_t v0 = 0x736f6d6570736575ull ^ k0;
    std::uint64_t v1 = 0x646f72616e646f6dull ^ k1;
    std::uint64_t v2 = 0x6c7967656e657261ull ^ k0;
    std::uint64_t v3 = 0x7465646279746573ull ^ k1;

    auto sipround = [&] {
        v0 += v1; v1 = std::rotl(v1, 13); v1 ^= v0; v0 = std::rotl(v0, 32);
        v2 += v3; v3 = std::rotl(v3, 16); v3 ^= v2;
        v0 += v3; v3 = std::rotl(v3, 21); v3 ^= v0;
        v2 += v1; v1 = std::rotl(v1, 17); v1 ^= v2; v2 = std::rotl(v2, 32);
    };

    const std::size_t n = data.size();
    const std::size_t end = n - n % 8;
    for (std::size_t i = 0; i < end; i += 8) {
        std::uint64_t m;
        std::memcpy(&m, data.data() + i, 8);
        v3 ^= m;
        sipround();
        sipround();
        v0 ^= m;
    }
    std::uint64_t b = static_cast<std::uint64_t>(n & 0xFF) << 56;
    for (std::size_t i = end; i < n; ++i) b |= static_cast<std::uint64_t>(data[i]) << (8 * (i - end));
    v3 ^= b;
    sipround();
    sipround();
    v0 ^= b;
    v2 ^= 0xFF;
    sipround();
    sipround();
    sipround();
    sipround();
    return v0 ^ v1 ^ v2 ^ v3;
}

}  // namespace panel
