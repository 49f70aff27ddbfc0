#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "panel/common.hpp"

namespace panel {

// Capacity arithmetic for truncated-key match-action tables.
struct CapacityModel {
    int key_bits = 24;
    std::uint64_t entry_bytes_forward = 6;
    std::uint64_t entry_bytes_reverse = 6;
    std::uint64_t ports_per_ip = 65536;
    std::uint64_t concurrent_sessions = 0;
};

struct TableMemory {
    std::uint64_t forward_bytes = 0;
    std::uint64_t reverse_bytes = 0;
    std::uint64_t total_bytes = 0;
};

// forward = 2^key_bits * entry_bytes_forward, reverse analogous.
// Throws FieldOutOfRange on key_bits outside 0..64 or arithmetic overflow.
TableMemory table_memory(const CapacityModel& model);

// ceil(concurrent_sessions / ports_per_ip)
std::uint64_t pool_size_required(std::uint64_t concurrent_sessions, std::uint64_t ports_per_ip);

struct CollisionEstimate {
    double exact = 0.0;        // n - 2^k (1 - (1 - 2^-k)^n)
    double approximate = 0.0;  // n^2 / 2^(k+1), small-n birthday approximation
};
CollisionEstimate expected_collisions(std::uint64_t n_sessions, int key_bits);

// One row of operator-supplied per-AS address census data.
struct AsRecord {
    std::uint64_t asn = 0;
    std::uint64_t total_ipv4 = 0;
    std::uint64_t active_ipv4 = 0;
};

struct AnonymityStats {
    std::size_t records = 0;
    double mean_total = 0.0;
    double std_total = 0.0;  // population standard deviation
    double mean_active = 0.0;
    double std_active = 0.0;
    double mean_active_fraction = 0.0;  // mean of per-AS active/total
};

// Throws EmptyInput on an empty list. Records with total 0 contribute a
// fraction of 0.
AnonymityStats anonymity_stats(const std::vector<AsRecord>& records);

struct TwoHopPath {
    std::uint64_t first_asn = 0;
    std::uint64_t second_asn = 0;
};

struct TwoHopResult {
    struct Row {
        TwoHopPath path;
        std::uint64_t total_sum = 0;
        std::uint64_t active_sum = 0;
    };
    std::vector<Row> per_path;
    double mean_total = 0.0;
    double std_total = 0.0;
    double mean_active = 0.0;
    double std_active = 0.0;
};

// Summed anonymity-set sizes when the first two segments both rewrite.
// Throws UnknownAsn when a path references an ASN absent from records.
TwoHopResult two_hop_anonymity(const std::vector<TwoHopPath>& paths,
                               const std::vector<AsRecord>& records);

// CSV "asn,total_ipv4,active_ipv4" with a header row. Throws MalformedRow,
// NegativeCount, and InputError (naming the row) when active > total.
std::vector<AsRecord> load_as_records(std::istream& in, const std::string& name);
std::vector<AsRecord> load_as_records_file(const std::string& path);

// CSV "first_asn,second_asn", header optional.
std::vector<TwoHopPath> load_paths(std::istream& in, const std::string& name);
std::vector<TwoHopPath> load_paths_file(const std::string& path);

}  // namespace panel
