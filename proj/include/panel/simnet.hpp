#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panel/landmark.hpp"
#include "panel/packet.hpp"

namespace panel::sim {

// Host stack model. The sequential / clock modes reproduce the classic
// fingerprintable behaviors the first landmark is supposed to hide.
struct HostModel {
    std::string name;
    IpAddr ip = 0;
    std::uint8_t initial_ttl = 64;
    enum class IpIdMode : std::uint8_t { Sequential, Random } ip_id_mode = IpIdMode::Sequential;
    enum class IsnMode : std::uint8_t { Clock, Random } isn_mode = IsnMode::Clock;
};

struct LandmarkNode {
    std::string name;
    LandmarkConfig config;
    bool enabled = true;  // disabled: plain TTL-decrementing router
};

struct LegacyHopNode {
    std::string name;
};

// Passive tap: records every packet crossing it, forwards unchanged.
// Optional active steps (replay / field corruption) for negative tests.
struct VantageNode {
    std::string name;
    struct Action {
        enum class What : std::uint8_t { Duplicate, CorruptField } what = What::Duplicate;
        std::uint64_t at_index = 0;  // applies to the nth packet this vantage sees
    };
    std::vector<Action> actions;
};

struct Route {
    Cidr prefix;
    std::string via;  // next node name
};

struct LinkDef {
    std::string from;
    std::string to;
    SimTime latency = micros(50);
};

struct DelayModel {
    SimTime establish = micros(800);  // slow path through the local agent
    SimTime forward = micros(100);    // fast-path match-action traversal
};

struct Topology {
    std::vector<HostModel> hosts;
    std::vector<LandmarkNode> landmarks;
    std::vector<LegacyHopNode> legacy_hops;
    std::vector<VantageNode> vantages;
    std::vector<LinkDef> links;
    std::map<std::string, std::vector<Route>> routes;
    DelayModel delays;

    // Checks: unique names, link endpoints exist, routes resolve, enabled
    // landmark pools disjoint, every host pair connected within 255 hops.
    // Throws ConfigError.
    void validate() const;
};

struct SessionScript {
    std::string client;
    std::string server;
    L4Proto protocol = L4Proto::Tcp;
    SimTime start = 0;
    // Offsets from session start for data packets; strictly increasing.
    // TCP data additionally waits for the handshake to finish.
    std::vector<SimTime> data_offsets;
    std::uint32_t payload_size = 64;
    std::uint32_t server_payload_size = 64;
    bool server_sack = false;  // server data replies carry one SACK block
};

// What a passive observer records; header metadata only, never payload.
struct VantageObservation {
    SimTime time = 0;
    std::string link;
    IpAddr src_ip = 0;
    IpAddr dst_ip = 0;
    std::uint8_t ttl = 0;
    std::uint16_t ip_id = 0;
    std::uint32_t tcp_seq = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
};

// Simulation-side ground truth carried next to each observation, index
// aligned. Never shown to adversary heuristics; used only for scoring.
struct ObservationTruth {
    std::uint64_t session_uid = 0;
    bool upstream = false;
    // Legacy hops crossed since the TTL was last written by a landmark;
    // -1 when no landmark has touched the packet yet.
    int distance_from_landmark = -1;
};

struct SessionRecord {
    std::uint64_t uid = 0;
    std::string client;
    std::string server;
    L4Proto protocol = L4Proto::Tcp;
    std::uint16_t client_port = 0;
    std::uint32_t client_isn = 0;
    SimTime first_rtt = -1;   // handshake (TCP) / first echo (UDP)
    SimTime steady_rtt = -1;  // mean over data exchanges
    std::size_t data_packets_sent = 0;
    std::size_t data_packets_acked = 0;
    bool completed = false;
    bool ack_arithmetic_ok = true;   // delivered acks matched client space
    bool sack_arithmetic_ok = true;  // delivered SACK edges matched client space
};

struct DeliveryRecord {
    SimTime time = 0;
    std::string host;
    std::uint64_t session_uid = 0;
    bool upstream = false;  // true when delivered at the server side
    IpAddr src_ip = 0;
    std::uint16_t src_port = 0;
    std::vector<std::uint8_t> payload;
};

struct DropRecord {
    SimTime time = 0;
    std::string node;
    std::string cause;
    std::uint64_t session_uid = 0;
};

struct HopTrace {
    std::uint64_t session_uid = 0;
    bool upstream = false;
    std::vector<std::string> nodes;  // node names in traversal order
};

struct TraceBundle {
    std::uint64_t seed = 0;
    std::map<std::string, std::vector<VantageObservation>> observations;
    std::map<std::string, std::vector<ObservationTruth>> observation_truth;
    std::vector<SessionRecord> sessions;
    std::vector<DeliveryRecord> deliveries;
    std::vector<DropRecord> drops;
    std::vector<HopTrace> hop_traces;
    std::map<std::string, std::map<std::string, std::uint64_t>> landmark_counters;
    std::uint64_t ttl_expired_drops = 0;
    std::uint64_t unroutable_drops = 0;
    std::uint64_t checksum_drops = 0;

    // Deterministic text export, one file per table, into `dir`.
    void export_csv(const std::string& dir) const;
};

struct RunOptions {
    // When set, serialize every link traversal into per-link pcap files
    // under this directory.
    std::optional<std::string> pcap_dir;
};

// Deterministic discrete-event run. Identical (topology, scripts, seed)
// give a byte-identical bundle. Throws ConfigError pre-run.
TraceBundle run(const Topology& topology, const std::vector<SessionScript>& scripts,
                std::uint64_t seed, const RunOptions& options = {});

// Log-level assertion helpers used by scenario expectations and tests.
bool reverse_path_landmarks_reversed(const TraceBundle& bundle);
bool payload_integrity_ok(const TraceBundle& bundle, const std::vector<SessionScript>& scripts);

// Deterministic payload pattern shared by scripts and integrity checks.
std::vector<std::uint8_t> session_payload(std::uint64_t session_uid, bool upstream,
                                          std::size_t packet_index, std::size_t size);

}  // namespace panel::sim
