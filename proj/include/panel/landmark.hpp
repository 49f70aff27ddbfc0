#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "panel/distribution.hpp"
#include "panel/flow.hpp"
#include "panel/rng.hpp"

namespace panel {

enum class KeyMode : std::uint8_t { Exact, TruncatedHash };

struct LandmarkConfig {
    Cidr pool_cidr;
    // Global list of segment prefixes. A source outside every prefix marks
    // this landmark as first on the path; an empty list means always first.
    std::vector<Cidr> panel_prefixes;
    TtlDistribution ttl{IntPmf::point_mass(64)};
    SimTime tcp_idle_timeout = seconds(900);
    SimTime udp_idle_timeout = seconds(120);
    SimTime flush_interval = seconds(10);
    KeyMode key_mode = KeyMode::Exact;
    int hash_key_bits = 24;  // k of TruncatedHash(k)
    // Width of the port part of the tag. 16 in deployment; tests shrink it
    // to hit tag-space exhaustion at manageable sizes.
    int tag_port_bits = 16;
    // Absent: keyed from entropy (CLI default). Tests must set it.
    std::optional<std::array<std::uint8_t, 32>> seed;
    std::uint64_t rng_stream = 0;

    int tag_bits() const { return pool_cidr.host_bits() + tag_port_bits; }
    void validate() const;

    // key = value config format, '#' comments. Relative ttl_file paths
    // resolve against the config file's directory.
    static LandmarkConfig load_file(const std::string& path);
};

// One PANEL landmark: tag allocation, forward/reverse tables, and the
// per-packet rewrite pipelines. Externally synchronized: shard traffic
// across instances for parallelism, never enter one instance concurrently.
//
// Tables live in memory only. There is no save/load; the sole way to see
// table contents is the explicitly debug-flagged dump.
class LandmarkEngine {
public:
    explicit LandmarkEngine(LandmarkConfig cfg);
    LandmarkEngine(const LandmarkEngine&) = delete;
    LandmarkEngine& operator=(const LandmarkEngine&) = delete;

    enum class Status : std::uint8_t {
        Forwarded,
        PassthroughFragment,     // non-first fragment, forwarded unmodified
        DropNoSession,           // TCP without entry and not a pure SYN
        DropNoReverseEntry,      // unsolicited inbound to a pool address
        DropCollision,           // truncated-key slot already taken
        DropTagSpaceExhausted,
    };
    static bool is_drop(Status s) { return s >= Status::DropNoSession; }

    struct Result {
        Status status = Status::Forwarded;
        // True when this packet created or activated a session (slow path
        // through the local agent); drives the simulator's delay model.
        bool establishment_event = false;
    };

    // Rewrites pkt in place (source fields, TTL, checksums). Establishes a
    // session on TCP pure-SYN / first UDP datagram.
    Result process_upstream(PacketView& pkt, SimTime now);
    // Restores the original destination on return traffic addressed to this
    // landmark's pool; adjusts ack and SACK arithmetic for first-segment
    // sessions.
    Result process_downstream(PacketView& pkt, SimTime now);

    struct EstablishOutcome {
        const SessionEntry* entry = nullptr;
        Status status = Status::Forwarded;
    };
    // Draws a tag (rejection sampling from the CSPRNG, uniform over the
    // pool), inserts forward and reverse entries. Preconditions per the
    // pipeline; exposed for tests.
    EstablishOutcome establish_session(const PacketView& pkt, SimTime now);

    // Evicts every entry idle past its protocol's timeout; returns how many.
    std::size_t expire_sessions(SimTime now);

    bool owns(IpAddr a) const { return cfg_.pool_cidr.contains(a); }
    std::size_t active_sessions() const { return by_tag_.size(); }
    const LandmarkConfig& config() const { return cfg_; }

    // Truncated lookup key (low hash_key_bits of a keyed 64-bit hash). In
    // Exact mode the table key is the FlowKey itself; this accessor still
    // reports the full keyed hash for diagnostics.
    std::uint64_t table_slot(const FlowKey& key) const;

    std::map<std::string, std::uint64_t> counters() const;

    // One line per forward entry, tab separated, sorted by FlowKey.
    // Debug aid only; never part of normal operation.
    void debug_dump(std::ostream& out) const;

private:
    struct FlowKeyHash {
        std::uint64_t k0, k1;
        std::size_t operator()(const FlowKey& k) const {
            auto b = k.packed();
            return static_cast<std::size_t>(siphash24(k0, k1, b));
        }
    };
    using Handle = std::shared_ptr<SessionEntry>;

    Handle* find_forward(const FlowKey& key);
    Handle* find_reverse(const FlowKey& rkey);
    bool forward_slot_taken(const FlowKey& key) const;
    bool reverse_slot_taken(const FlowKey& rkey) const;
    void insert(const Handle& h);
    void erase(const SessionEntry& e);
    Tag draw_tag(Status& failure);

    LandmarkConfig cfg_;
    ChaChaRng rng_;
    std::uint64_t hash_k0_ = 0, hash_k1_ = 0;

    // Exact mode uses the FlowKey maps; TruncatedHash mode the slot maps.
    std::unordered_map<FlowKey, Handle, FlowKeyHash> fwd_exact_;
    std::unordered_map<FlowKey, Handle, FlowKeyHash> rev_exact_;
    std::unordered_map<std::uint64_t, Handle> fwd_hashed_;
    std::unordered_map<std::uint64_t, Handle> rev_hashed_;
    std::unordered_set<std::uint64_t> by_tag_;

    struct Counters {
        std::uint64_t establishments = 0;
        std::uint64_t activations = 0;
        std::uint64_t evictions = 0;
        std::uint64_t collisions = 0;  // forward-slot establish collisions
        std::uint64_t reverse_collisions = 0;
        std::uint64_t drop_no_session = 0;
        std::uint64_t drop_no_reverse_entry = 0;
        std::uint64_t drop_tag_space_exhausted = 0;
        std::uint64_t fragment_passthrough = 0;
        std::uint64_t upstream_packets = 0;
        std::uint64_t downstream_packets = 0;
    } n_;
};

// The per-entry match-action payload the capacity arithmetic assumes:
// 4 bytes of address plus 2 bytes of port in each direction.
constexpr std::size_t kForwardEntryBytes = 6;
constexpr std::size_t kReverseEntryBytes = 6;

}  // namespace panel
