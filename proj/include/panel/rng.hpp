#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace panel {

// Deterministic cryptographic stream generator (ChaCha20, 96-bit nonce /
// 32-bit block counter layout). One instance per independent stream; the
// stream id goes into the nonce so substreams derived from one key never
// overlap.
class ChaChaRng {
public:
    using result_type = std::uint64_t;

    explicit ChaChaRng(const std::array<std::uint8_t, 32>& key, std::uint64_t stream = 0);

    // Expands a 64-bit seed into a 256-bit key (splitmix64 chain).
    static ChaChaRng from_seed(std::uint64_t seed, std::uint64_t stream = 0);
    // Key drawn from std::random_device.
    static ChaChaRng from_entropy(std::uint64_t stream = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~static_cast<result_type>(0); }
    result_type operator()();

    // Uniform integer in [0, n), n >= 1. Rejection sampling, no modulo bias.
    std::uint64_t uniform_below(std::uint64_t n);
    // Uniform double in [0, 1) with 53 random bits.
    double uniform01();
    void fill_bytes(std::span<std::uint8_t> out);

    const std::array<std::uint8_t, 32>& key() const { return key_; }

    // Raw block function, exposed for the published test vector.
    static std::array<std::uint8_t, 64> block(const std::array<std::uint8_t, 32>& key,
                                              std::uint32_t counter,
                                              const std::array<std::uint8_t, 12>& nonce);

private:
    void refill();

    std::array<std::uint8_t, 32> key_{};
    std::array<std::uint8_t, 12> nonce_{};
    std::uint32_t counter_ = 0;
    std::array<std::uint64_t, 8> buf_{};
    unsigned pos_ = 8;  // empty
};

std::uint64_t splitmix64(std::uint64_t& state);

// 256-bit seed material: either a decimal 64-bit integer or a 64-hex-digit
// string. Returns the expanded key.
std::array<std::uint8_t, 32> parse_seed_key(const std::string& text);
std::array<std::uint8_t, 32> seed_key_from_u64(std::uint64_t seed);

// SipHash-2-4 with a 128-bit key; used for flow-table key hashing.
std::uint64_t siphash24(std::uint64_t k0, std::uint64_t k1, std::span<const std::uint8_t> data);

}  // namespace panel
